"""
CSV serialization of accuracy matrices.

Row t of the file holds a[t][1..t]; cells above the diagonal are empty.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.metrics.accuracy import AccuracyMatrix
from src.metrics.exceptions import MetricsError

logger = logging.getLogger(__name__)


def matrix_to_frame(a: AccuracyMatrix) -> pd.DataFrame:
    """DataFrame indexed by ``after_task`` with one ``task_i`` column per task."""
    total_tasks = a.num_tasks
    frame = pd.DataFrame(
        a.to_array(),
        columns=[f"task_{i}" for i in range(1, total_tasks + 1)],
        index=pd.Index(range(1, total_tasks + 1), name="after_task"),
    )
    return frame


def write_matrix_csv(a: AccuracyMatrix, path: Union[str, Path]) -> Path:
    """Write the matrix as CSV and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix_to_frame(a).to_csv(path)
    logger.info(f"wrote accuracy matrix to {path}")
    return path


def read_matrix_csv(path: Union[str, Path]) -> AccuracyMatrix:
    """
    Read a matrix written by :func:`write_matrix_csv`.

    Raises:
        MetricsError: If the file is not a square lower-triangular grid
    """
    frame = pd.read_csv(path, index_col="after_task", float_precision="round_trip")
    values = frame.to_numpy(dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise MetricsError(f"{path}: expected a square matrix, got {values.shape}")
    return AccuracyMatrix.from_rows(
        [values[t, : t + 1] for t in range(values.shape[0])]
    )
