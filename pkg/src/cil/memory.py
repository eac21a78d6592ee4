"""
Class-balanced exemplar memory with random selection.
"""
import logging
from typing import Dict, Tuple

import numpy as np

from src.cil.exceptions import EmptySourceError, HarnessError
from src.cil.stream import TaskData
from src.tensor import Rng, Tensor

logger = logging.getLogger(__name__)


class ExemplarMemory:
    """
    Capped store of past-task samples, kept class-balanced.

    Attributes:
        capacity: |M|, the maximum number of stored samples
        quota: Per-class quota after the last update
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise HarnessError(f"memory capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.quota = 0
        self._samples: Dict[int, Tensor] = {}

    def __len__(self) -> int:
        return sum(x.shape[0] for x in self._samples.values())

    @property
    def classes(self) -> list:
        return sorted(self._samples)

    def class_counts(self) -> Dict[int, int]:
        """Stored samples per class."""
        return {label: int(x.shape[0]) for label, x in sorted(self._samples.items())}

    def arrays(self) -> Tuple[Tensor, np.ndarray]:
        """All stored samples and labels, ordered by class."""
        if not self._samples:
            raise EmptySourceError("exemplar memory is empty")
        labels = self.classes
        x = np.concatenate([self._samples[c] for c in labels], axis=0)
        y = np.concatenate(
            [np.full(self._samples[c].shape[0], c, dtype=np.int64) for c in labels]
        )
        return x, y

    def sample(self, count: int, rng: Rng) -> Tuple[Tensor, np.ndarray]:
        """
        Draw ``count`` stored samples uniformly with replacement.

        Raises:
            EmptySourceError: If the memory is empty and count > 0
        """
        x, y = self.arrays()
        idx = rng.integers(0, y.shape[0], size=count)
        return x[idx], y[idx]

    def update(self, x: Tensor, y: np.ndarray, classes_seen: int, rng: Rng) -> None:
        """
        Re-balance after a task: shrink old classes and add the new ones.

        Args:
            x: Training features of the task just finished
            y: Their labels
            classes_seen: C_t, classes seen so far
            rng: Random source for the selection
        """
        self.quota = self.capacity // classes_seen if classes_seen > 0 else 0
        for label in self.classes:
            stored = self._samples[label]
            if stored.shape[0] > self.quota:
                keep = rng.choice(stored.shape[0], size=self.quota, replace=False)
                self._samples[label] = stored[np.sort(keep)]
        for label in np.unique(y):
            label = int(label)
            pool = x[y == label]
            take = min(self.quota, pool.shape[0])
            chosen = rng.choice(pool.shape[0], size=take, replace=False)
            self._samples[label] = pool[np.sort(chosen)]
        self._samples = {c: s for c, s in self._samples.items() if s.shape[0] > 0}
        assert len(self) <= self.capacity
        logger.info(
            f"memory updated: {len(self)}/{self.capacity} samples, "
            f"quota {self.quota} over {classes_seen} classes"
        )


def memory_update(memory: ExemplarMemory, task: TaskData, rng: Rng) -> ExemplarMemory:
    """
    Update ``memory`` after finishing ``task`` and return it.

    Labels are contiguous from 0, so C_t is one past the task's largest class.
    """
    memory.update(task.train_x, task.train_y, max(task.classes) + 1, rng)
    return memory
