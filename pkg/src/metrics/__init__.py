"""
Class-incremental learning metrics.
"""
from src.metrics.exceptions import MetricsError, UnseenClassError
from src.metrics.accuracy import (
    AccuracyMatrix,
    final_accuracy,
    average_accuracy,
    forgetting,
    learning_accuracy,
    accuracy_curve,
    summarize,
)
from src.metrics.taxonomy import misclass_taxonomy
from src.metrics.io import matrix_to_frame, write_matrix_csv, read_matrix_csv

__all__ = [
    "MetricsError",
    "UnseenClassError",
    "AccuracyMatrix",
    "final_accuracy",
    "average_accuracy",
    "forgetting",
    "learning_accuracy",
    "accuracy_curve",
    "summarize",
    "misclass_taxonomy",
    "matrix_to_frame",
    "write_matrix_csv",
    "read_matrix_csv",
]
