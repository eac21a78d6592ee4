"""
Fixtures for harness tests.
"""
import numpy as np
import pytest

from src.cil import TaskData, TaskStream, synthetic_stream


def make_task(task, classes, per_class, dim=4, spacing=4.0, noise=0.5, seed=0):
    """Well-separated blobs, one per class, on the diagonal."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for k, label in enumerate(classes):
        center = spacing * (k - (len(classes) - 1) / 2.0)
        xs.append(center + noise * rng.standard_normal((per_class, dim)))
        ys.append(np.full(per_class, label, dtype=np.int64))
    x = np.concatenate(xs)[:, :, None, None]
    y = np.concatenate(ys)
    return TaskData(task, list(classes), x, y, x.copy(), y.copy())


@pytest.fixture
def separable_task():
    """One task of two far-apart classes, test set equal to the train set."""
    return make_task(1, [0, 1], per_class=80)


@pytest.fixture
def small_stream(small_stream_config):
    """Two synthetic tasks of two classes."""
    return synthetic_stream(small_stream_config, seed=3)


@pytest.fixture
def five_task_stream():
    """Five tasks of two classes each, 20 training rows per class."""
    tasks = [
        make_task(t, [2 * (t - 1), 2 * (t - 1) + 1], per_class=20, seed=t)
        for t in range(1, 6)
    ]
    return TaskStream(tasks=tasks, classes_per_task=2)
