"""
IDX file reader and IDX-backed task streams.

IDX layout: a big-endian magic whose third byte is the element type (0x08
for unsigned bytes) and fourth byte the rank, followed by ``rank``
big-endian 32-bit extents and the row-major payload.
"""
import logging
from pathlib import Path
from typing import Literal, Union

import numpy as np

from src.cil.exceptions import IdxFormatError
from src.cil.stream import TaskData, TaskStream, split_train_test
from src.tensor import make_rng

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def read_idx(path: Union[str, Path], expected_magic: int) -> np.ndarray:
    """
    Read an unsigned-byte IDX file.

    Args:
        path: File to read
        expected_magic: IMAGE_MAGIC or LABEL_MAGIC

    Returns:
        uint8 array with the extents from the header

    Raises:
        IdxFormatError: On a wrong magic, truncated header or payload size mismatch
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: file too short for an IDX header")
    magic = int.from_bytes(raw[:4], "big")
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: magic 0x{magic:08x} does not match 0x{expected_magic:08x}"
        )
    rank = raw[3]
    header = 4 + 4 * rank
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header for rank {rank}")
    dims = tuple(int(d) for d in np.frombuffer(raw, dtype=">u4", count=rank, offset=4))
    payload = np.frombuffer(raw, dtype=np.uint8, offset=header)
    if payload.size != int(np.prod(dims)):
        raise IdxFormatError(
            f"{path}: payload has {payload.size} bytes, header promises {dims}"
        )
    return payload.reshape(dims)


def load_idx_stream(
    images: Union[str, Path],
    labels: Union[str, Path],
    classes_per_task: int,
    seed: int = 0,
    layout: Literal["mlp", "conv"] = "mlp",
    test_fraction: float = 0.2,
) -> TaskStream:
    """
    Build a task stream from IDX images and labels.

    Tasks are contiguous groups of ``classes_per_task`` labels in ascending
    label order; labels are remapped to 0..K-1. Pixels are rescaled to [0, 1].

    Args:
        images: IDX image file (N, H, W)
        labels: IDX label file (N,)
        classes_per_task: m
        seed: Seed for the per-task train/test split
        layout: "mlp" gives (N, H*W, 1, 1) rows, "conv" gives (N, 1, H, W)
        test_fraction: Share of each task held out for testing

    Returns:
        TaskStream

    Raises:
        IdxFormatError: If files are malformed or disagree in length
    """
    pixels = read_idx(images, IMAGE_MAGIC)
    targets = read_idx(labels, LABEL_MAGIC)
    if pixels.ndim != 3 or targets.ndim != 1:
        raise IdxFormatError(
            f"expected (N, H, W) images and (N,) labels, got {pixels.shape} and {targets.shape}"
        )
    if pixels.shape[0] != targets.shape[0]:
        raise IdxFormatError(
            f"{pixels.shape[0]} images but {targets.shape[0]} labels"
        )

    n, h, w = pixels.shape
    x = pixels.astype(np.float64) / 255.0
    x = x.reshape(n, h * w, 1, 1) if layout == "mlp" else x.reshape(n, 1, h, w)

    distinct = np.unique(targets)
    remap = {int(label): i for i, label in enumerate(distinct)}
    y = np.array([remap[int(label)] for label in targets], dtype=np.int64)

    num_tasks = len(distinct) // classes_per_task
    if num_tasks == 0:
        raise IdxFormatError(
            f"{len(distinct)} labels cannot fill a task of {classes_per_task} classes"
        )
    if len(distinct) % classes_per_task:
        logger.warning(
            f"dropping {len(distinct) % classes_per_task} trailing labels "
            f"that do not fill a task"
        )

    rng = make_rng(seed)
    tasks = []
    for t in range(1, num_tasks + 1):
        classes = list(range(classes_per_task * (t - 1), classes_per_task * t))
        mask = np.isin(y, classes)
        train_x, train_y, test_x, test_y = split_train_test(
            x[mask], y[mask], rng, test_fraction
        )
        tasks.append(TaskData(t, classes, train_x, train_y, test_x, test_y))

    logger.info(f"loaded IDX stream from {images}: {n} images, {num_tasks} tasks")
    return TaskStream(tasks=tasks, classes_per_task=classes_per_task)
