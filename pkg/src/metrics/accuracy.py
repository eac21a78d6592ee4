"""
Accuracy matrix and the CIL summary metrics computed from it.

a[t][i] is the test accuracy on task i after training through task t,
defined for i <= t. Indices are 1-based in the API.
"""
from typing import List, Sequence

import numpy as np

from src.metrics.exceptions import MetricsError
from src.models import MetricsReport


class AccuracyMatrix:
    """Lower-triangular grid of per-task accuracies."""

    def __init__(self, num_tasks: int):
        if num_tasks < 1:
            raise MetricsError(f"accuracy matrix needs at least one task, got {num_tasks}")
        self._a = np.full((num_tasks, num_tasks), np.nan)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "AccuracyMatrix":
        """Build from rows where row t holds a[t][1..t]."""
        matrix = cls(len(rows))
        for t, row in enumerate(rows, start=1):
            matrix.set_row(t, row)
        return matrix

    @property
    def num_tasks(self) -> int:
        return int(self._a.shape[0])

    def set_row(self, t: int, values: Sequence[float]) -> None:
        """
        Record the accuracies measured after task t.

        Raises:
            MetricsError: On a wrong row length or a value outside [0, 1]
        """
        values = np.asarray(values, dtype=np.float64)
        if not 1 <= t <= self.num_tasks:
            raise MetricsError(f"row {t} outside a {self.num_tasks}-task matrix")
        if values.shape != (t,):
            raise MetricsError(f"row {t} needs {t} accuracies, got {values.shape}")
        if np.any(values < 0.0) or np.any(values > 1.0) or np.any(np.isnan(values)):
            raise MetricsError(f"accuracies must lie in [0, 1], got {values.tolist()}")
        self._a[t - 1, :t] = values

    def row(self, t: int) -> np.ndarray:
        """a[t][1..t]."""
        return self._a[t - 1, :t].copy()

    def value(self, t: int, i: int) -> float:
        if not 1 <= i <= t <= self.num_tasks:
            raise MetricsError(f"a[{t}][{i}] is outside the lower triangle")
        return float(self._a[t - 1, i - 1])

    def is_complete(self) -> bool:
        return not np.any(np.isnan(self._a[np.tril_indices(self.num_tasks)]))

    def to_rows(self) -> List[List[float]]:
        return [self.row(t).tolist() for t in range(1, self.num_tasks + 1)]

    def to_array(self) -> np.ndarray:
        """(T, T) copy with NaN above the diagonal."""
        return self._a.copy()

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccuracyMatrix):
            return NotImplemented
        return np.array_equal(self._a, other._a, equal_nan=True)

    def __repr__(self) -> str:
        return f"AccuracyMatrix({self.to_rows()})"


def _checked(a: AccuracyMatrix) -> AccuracyMatrix:
    if not a.is_complete():
        raise MetricsError("accuracy matrix has unset entries in its lower triangle")
    return a


def final_accuracy(a: AccuracyMatrix) -> float:
    """A_f: mean accuracy over all tasks after the last task."""
    a = _checked(a)
    return float(a.row(a.num_tasks).mean())


def accuracy_curve(a: AccuracyMatrix) -> List[float]:
    """Mean accuracy over seen tasks after each task t = 1..T."""
    a = _checked(a)
    return [float(a.row(t).mean()) for t in range(1, a.num_tasks + 1)]


def average_accuracy(a: AccuracyMatrix) -> float:
    """A_a: the accuracy curve averaged over tasks."""
    return float(np.mean(accuracy_curve(a)))


def forgetting(a: AccuracyMatrix) -> float:
    """
    F: mean over tasks of the largest drop from the just-learned accuracy.

    The last task has no later measurement; its empty maximum counts as 0 and
    the sum is still divided by T.
    """
    a = _checked(a)
    total_tasks = a.num_tasks
    drops = []
    for i in range(1, total_tasks + 1):
        later = [a.value(i, i) - a.value(t, i) for t in range(i + 1, total_tasks + 1)]
        drops.append(max(later) if later else 0.0)
    return float(sum(drops) / total_tasks)


def learning_accuracy(a: AccuracyMatrix) -> float:
    """A_l: mean of the diagonal."""
    a = _checked(a)
    return float(np.mean([a.value(i, i) for i in range(1, a.num_tasks + 1)]))


def summarize(a: AccuracyMatrix) -> MetricsReport:
    """All four metrics in one report."""
    return MetricsReport(
        final_accuracy=final_accuracy(a),
        average_accuracy=average_accuracy(a),
        forgetting=forgetting(a),
        learning_accuracy=learning_accuracy(a),
    )
