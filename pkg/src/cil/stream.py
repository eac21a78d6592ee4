"""
Task streams for class-incremental learning.

A stream is an ordered list of tasks, each introducing ``classes_per_task``
new classes. Labels are 0-indexed and task t owns labels
[m*(t-1), m*t).
"""
from dataclasses import dataclass
import logging
from typing import List, Tuple

import numpy as np

from src.cil.exceptions import EmptySourceError, HarnessError
from src.models import StreamConfig
from src.tensor import Rng, Tensor, make_rng

logger = logging.getLogger(__name__)


@dataclass
class TaskData:
    """
    Labeled train/test split of one task.

    Attributes:
        task: 1-based task index
        classes: Labels this task introduces
        train_x: Training features (N, C, H, W)
        train_y: Training labels (N,)
        test_x: Test features
        test_y: Test labels
    """

    task: int
    classes: List[int]
    train_x: Tensor
    train_y: np.ndarray
    test_x: Tensor
    test_y: np.ndarray

    @property
    def train_size(self) -> int:
        return int(self.train_y.shape[0])


@dataclass
class TaskStream:
    """Ordered tasks of a class-incremental benchmark."""

    tasks: List[TaskData]
    classes_per_task: int

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def in_shape(self) -> Tuple[int, int, int]:
        return tuple(self.tasks[0].train_x.shape[1:])

    def task(self, t: int) -> TaskData:
        """Task t (1-based)."""
        if not 1 <= t <= self.num_tasks:
            raise HarnessError(f"task {t} outside stream of {self.num_tasks} tasks")
        return self.tasks[t - 1]

    def classes_seen(self, t: int) -> int:
        """C_t = m * t."""
        return self.classes_per_task * t

    def task_of_class(self) -> List[int]:
        """1-based task index for every label."""
        return [
            task.task for task in self.tasks for _ in range(len(task.classes))
        ]

    def union(self, upto_t: int, split: str = "train") -> Tuple[Tensor, np.ndarray]:
        """Concatenated features and labels of tasks 1..upto_t."""
        parts = self.tasks[:upto_t]
        if not parts:
            raise EmptySourceError("stream has no tasks to concatenate")
        xs = [getattr(p, f"{split}_x") for p in parts]
        ys = [getattr(p, f"{split}_y") for p in parts]
        return np.concatenate(xs, axis=0), np.concatenate(ys, axis=0)


def split_train_test(
    x: Tensor, y: np.ndarray, rng: Rng, test_fraction: float = 0.2
) -> Tuple[Tensor, np.ndarray, Tensor, np.ndarray]:
    """Seeded shuffled split into (train_x, train_y, test_x, test_y)."""
    order = rng.permutation(y.shape[0])
    n_test = int(round(test_fraction * y.shape[0]))
    test_idx, train_idx = order[:n_test], order[n_test:]
    return x[train_idx], y[train_idx], x[test_idx], y[test_idx]


def synthetic_stream(config: StreamConfig, seed: int) -> TaskStream:
    """
    Gaussian class blobs in a ``dim``-dimensional feature space.

    Class means sit on hypercube vertices with side ``class_scale``, offset by
    a per-task shift vertex with side ``task_shift`` so that tasks differ in
    their feature statistics. Features are returned as (N, dim, 1, 1) rows.

    Args:
        config: Stream settings
        seed: Seed for means, samples and the train/test split

    Returns:
        TaskStream with ``config.tasks`` tasks
    """
    rng = make_rng(seed)
    m = config.classes_per_task
    tasks = []
    for t in range(1, config.tasks + 1):
        shift = (config.task_shift / 2.0) * rng.choice([-1.0, 1.0], size=config.dim)
        classes = list(range(m * (t - 1), m * t))
        xs, ys = [], []
        for label in classes:
            vertex = (config.class_scale / 2.0) * rng.choice([-1.0, 1.0], size=config.dim)
            samples = shift + vertex + config.noise * rng.standard_normal(
                (config.samples_per_class, config.dim)
            )
            xs.append(samples)
            ys.append(np.full(config.samples_per_class, label, dtype=np.int64))
        x = np.concatenate(xs)[:, :, None, None]
        y = np.concatenate(ys)
        train_x, train_y, test_x, test_y = split_train_test(x, y, rng)
        tasks.append(TaskData(t, classes, train_x, train_y, test_x, test_y))
    logger.info(
        f"built synthetic stream: {config.tasks} tasks x {m} classes, dim={config.dim}"
    )
    return TaskStream(tasks=tasks, classes_per_task=m)
