"""
Composition of current-task and exemplar rows into one mini-batch.
"""
from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np

from src.cil.exceptions import EmptySourceError
from src.cil.memory import ExemplarMemory
from src.cil.stream import TaskData
from src.norm import BatchComposition
from src.tensor import Rng, Tensor

logger = logging.getLogger(__name__)


@dataclass
class TaskBatch:
    """
    A composed mini-batch: B_c current-task rows followed by B_p exemplar rows.
    """

    x: Tensor
    y: np.ndarray
    composition: BatchComposition


def compose_batch(
    task: TaskData,
    memory: Optional[ExemplarMemory],
    batch_current: int,
    batch_previous: int,
    rng: Rng,
    current_idx: Optional[np.ndarray] = None,
) -> TaskBatch:
    """
    Build a batch with the current-task rows first.

    Args:
        task: Dataset of the current task
        memory: Exemplar memory, may be None or empty only for B_p = 0
        batch_current: B_c
        batch_previous: B_p, forced to 0 for the first task
        rng: Random source
        current_idx: Rows of the task's training set to use as the current
            part; B_c rows are drawn without replacement when omitted

    Returns:
        TaskBatch with composition (B_c, B_p, t)

    Raises:
        EmptySourceError: If the task has no training rows or B_p > 0 with an
            empty memory
    """
    if task.train_size == 0:
        raise EmptySourceError(f"task {task.task} has no training samples")
    if task.task == 1:
        batch_previous = 0
    if current_idx is None:
        current_idx = rng.choice(
            task.train_size, size=min(batch_current, task.train_size), replace=False
        )
    x_cur = task.train_x[current_idx]
    y_cur = task.train_y[current_idx]

    if batch_previous > 0:
        if memory is None or len(memory) == 0:
            raise EmptySourceError(
                f"task {task.task} batch needs {batch_previous} exemplars but memory is empty"
            )
        x_mem, y_mem = memory.sample(batch_previous, rng)
        x = np.concatenate([x_cur, x_mem], axis=0)
        y = np.concatenate([y_cur, y_mem], axis=0)
    else:
        x, y = x_cur, y_cur

    composition = BatchComposition(
        batch_current=int(y_cur.shape[0]),
        batch_previous=int(batch_previous),
        task=task.task,
    )
    return TaskBatch(x=x, y=y, composition=composition)
