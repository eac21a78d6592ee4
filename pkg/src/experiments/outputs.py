"""
Run directories and the JSON/CSV files written into them.
"""
import json
import logging
from pathlib import Path
from typing import Any, Union

import pandas as pd
from pydantic import BaseModel

from src.models import RunConfig

logger = logging.getLogger(__name__)


def run_directory(config: RunConfig, *parts: Any) -> Path:
    """Create and return ``config.output_dir / part / ...``."""
    path = Path(config.output_dir).joinpath(*(str(p) for p in parts))
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(payload: Union[BaseModel, dict, list], path: Union[str, Path]) -> Path:
    """Write a pydantic model or plain JSON value with stable formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


def write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a DataFrame as CSV without the index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"wrote {path} ({len(frame)} rows)")
    return path


def read_frame(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by :func:`write_frame` without float rounding."""
    return pd.read_csv(path, float_precision="round_trip")


def echo_config(config: RunConfig, directory: Path) -> Path:
    """Write the run's configuration next to its outputs."""
    return write_json(config, Path(directory) / "config.json")
