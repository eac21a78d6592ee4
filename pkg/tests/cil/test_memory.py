"""
Tests for the exemplar memory and batch composition.
"""
import numpy as np
import pytest

from src.cil import (
    EmptySourceError,
    ExemplarMemory,
    HarnessError,
    compose_batch,
    memory_update,
)

from tests.cil.conftest import make_task


def test_quota_after_second_task(rng):
    """Test |M|=12 with C_t=4 keeps 3 per class."""
    memory = ExemplarMemory(12)

    memory_update(memory, make_task(1, [0, 1], per_class=10), rng)
    assert memory.class_counts() == {0: 6, 1: 6}

    memory_update(memory, make_task(2, [2, 3], per_class=10), rng)
    assert memory.quota == 3
    assert memory.class_counts() == {0: 3, 1: 3, 2: 3, 3: 3}


def test_quota_at_scale(rng):
    """Test |M|=2000 over 100 classes keeps 20 per class."""
    memory = ExemplarMemory(2000)

    for t in range(1, 11):
        classes = list(range(10 * (t - 1), 10 * t))
        memory_update(memory, make_task(t, classes, per_class=25, dim=1), rng)
        assert len(memory) <= 2000

    assert memory.quota == 20
    assert set(memory.class_counts().values()) == {20}


def test_scarce_class_is_not_duplicated(rng):
    """Test a class with one sample keeps exactly one."""
    task = make_task(1, [0, 1], per_class=5)
    keep = np.concatenate([np.arange(5), [5]])
    task.train_x, task.train_y = task.train_x[keep], task.train_y[keep]
    memory = ExemplarMemory(10)

    memory_update(memory, task, rng)

    assert memory.class_counts() == {0: 5, 1: 1}


def test_downsampled_rows_come_from_stored_rows(rng):
    """Test shrinking keeps a subset of the stored samples."""
    memory = ExemplarMemory(8)
    first = make_task(1, [0, 1], per_class=10)
    memory_update(memory, first, rng)
    before, before_y = memory.arrays()

    memory_update(memory, make_task(2, [2, 3], per_class=10), rng)
    after, after_y = memory.arrays()

    old_rows = {tuple(row.ravel()) for row in before}
    for row, label in zip(after, after_y):
        if label < 2:
            assert tuple(row.ravel()) in old_rows


def test_sample_with_replacement(rng):
    """Test sampling more rows than stored."""
    memory = ExemplarMemory(4)
    memory_update(memory, make_task(1, [0, 1], per_class=10), rng)

    x, y = memory.sample(9, rng)

    assert x.shape == (9, 4, 1, 1)
    assert set(np.unique(y)) <= {0, 1}


def test_empty_memory_cannot_sample(rng):
    """Test sampling from an empty memory."""
    with pytest.raises(EmptySourceError):
        ExemplarMemory(10).sample(2, rng)


def test_negative_capacity():
    """Test capacity must be nonnegative."""
    with pytest.raises(HarnessError):
        ExemplarMemory(-1)


def test_compose_batch_orders_current_rows_first(rng):
    """Test B_c=48, B_p=16 gives 64 rows with the current task first."""
    memory = ExemplarMemory(40)
    memory_update(memory, make_task(1, [0, 1], per_class=60), rng)
    task = make_task(2, [2, 3], per_class=60)

    batch = compose_batch(task, memory, 48, 16, rng)

    assert batch.x.shape[0] == 64
    assert set(np.unique(batch.y[:48])) <= {2, 3}
    assert set(np.unique(batch.y[48:])) <= {0, 1}
    assert (batch.composition.batch_current, batch.composition.batch_previous) == (48, 16)
    assert batch.composition.task == 2


def test_compose_batch_first_task_has_no_exemplars(rng):
    """Test t=1 drops B_p."""
    batch = compose_batch(make_task(1, [0, 1], per_class=30), None, 12, 4, rng)

    assert batch.x.shape[0] == 12
    assert batch.composition.batch_previous == 0


def test_compose_batch_needs_memory(rng):
    """Test t >= 2 with B_p > 0 and an empty memory."""
    with pytest.raises(EmptySourceError):
        compose_batch(make_task(2, [2, 3], per_class=10), ExemplarMemory(10), 8, 4, rng)


def test_compose_batch_empty_task(rng):
    """Test a task without training rows."""
    task = make_task(1, [0, 1], per_class=3)
    task.train_x, task.train_y = task.train_x[:0], task.train_y[:0]

    with pytest.raises(EmptySourceError):
        compose_batch(task, None, 4, 0, rng)


def test_exemplar_rows_are_task_uniform(five_task_stream, rng):
    """Test per-task exemplar counts at t=5 average B_p/4 over 10^4 batches."""
    memory = ExemplarMemory(40)
    for t in range(1, 5):
        memory_update(memory, five_task_stream.task(t), rng)
    task_of_class = np.array(five_task_stream.task_of_class())
    batches, bp = 10_000, 16
    counts = np.zeros((batches, 4))

    for i in range(batches):
        batch = compose_batch(five_task_stream.task(5), memory, 8, bp, rng)
        tasks = task_of_class[batch.y[8:]]
        counts[i] = np.bincount(tasks, minlength=5)[1:]

    means = counts.mean(axis=0)
    errors = counts.std(axis=0, ddof=1) / np.sqrt(batches)
    assert np.all(np.abs(means - bp / 4) < 3.5 * errors)
