"""
TBNORM1 checkpoints: a JSON manifest followed by a float64 parameter blob.

File layout:
    b"TBNORM1\n"
    manifest length as an 8-byte little-endian unsigned integer
    manifest JSON (UTF-8)
    every tensor in manifest order, little-endian float64, row-major
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from src.cil import HarnessError, TinyModel
from src.experiments.exceptions import CheckpointError
from src.models import CheckpointManifest

logger = logging.getLogger(__name__)

MAGIC = "TBNORM1"
_PREFIX = (MAGIC + "\n").encode("ascii")


def save_checkpoint(model: TinyModel, path: Union[str, Path]) -> Path:
    """
    Write the model's parameters and running statistics.

    Args:
        model: Model to snapshot
        path: Destination file

    Returns:
        The path written
    """
    path = Path(path)
    state = model.state_dict()
    tensors, blobs, offset = [], [], 0
    for name, array in state.items():
        tensors.append({"name": name, "shape": list(array.shape), "offset": offset})
        blobs.append(np.asarray(array, dtype="<f8").ravel())
        offset += array.size

    manifest = CheckpointManifest(
        magic=MAGIC,
        arch=model.arch,
        norm=model.norm,
        hidden=model.hidden,
        groups=model.groups,
        in_shape=list(model.in_shape),
        num_classes=model.num_classes,
        ablation=model.ablation,
        bessel=model.bessel,
        tensors=tensors,
    )
    header = manifest.model_dump_json().encode("utf-8")
    blob = np.concatenate(blobs).astype("<f8") if blobs else np.zeros(0, dtype="<f8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREFIX)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        f.write(blob.tobytes())
    logger.info(f"saved checkpoint {path} ({offset} values)")
    return path


def load_checkpoint(path: Union[str, Path]) -> TinyModel:
    """
    Rebuild a TinyModel from a checkpoint.

    Raises:
        CheckpointError: On a wrong magic, a corrupt manifest or a blob of
            the wrong size
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if not raw.startswith(_PREFIX):
        raise CheckpointError(f"{path} is not a {MAGIC} checkpoint")
    start = len(_PREFIX)
    length = int.from_bytes(raw[start : start + 8], "little")
    header_end = start + 8 + length
    try:
        manifest = CheckpointManifest.model_validate_json(raw[start + 8 : header_end])
    except ValidationError as e:
        raise CheckpointError(f"corrupt manifest in {path}") from e
    if manifest.magic != MAGIC:
        raise CheckpointError(f"unsupported checkpoint version {manifest.magic}")

    try:
        blob = np.frombuffer(raw, dtype="<f8", offset=header_end).astype(np.float64)
    except ValueError as e:
        raise CheckpointError(f"truncated parameter blob in {path}") from e
    state = {}
    for entry in manifest.tensors:
        shape = tuple(int(v) for v in entry["shape"])
        offset = int(entry["offset"])
        size = int(np.prod(shape))
        if offset + size > blob.size:
            raise CheckpointError(f"{path}: blob too short for {entry['name']}")
        state[str(entry["name"])] = blob[offset : offset + size].reshape(shape)

    model = TinyModel(
        manifest.in_shape,
        manifest.num_classes,
        norm=manifest.norm,
        hidden=manifest.hidden,
        groups=manifest.groups,
        ablation=manifest.ablation,
        bessel=manifest.bessel,
        arch=manifest.arch,
    )
    try:
        model.load_state_dict(state)
    except HarnessError as e:
        raise CheckpointError(f"checkpoint {path} does not fit its manifest: {e}") from e
    logger.info(f"loaded checkpoint {path}")
    return model
