"""
Tests for FT training, evaluation and full class-incremental runs.
"""
import logging

import numpy as np
import pytest

from src.cil import (
    HarnessError,
    NumericFailureError,
    TaskBatch,
    TinyModel,
    evaluate,
    fit_batches,
    run_cil,
    train_joint,
    train_task,
)
from src.cil.stream import TaskStream
from src.models import TrainConfig
from src.norm import BatchComposition


def test_separable_task_is_learned(separable_task):
    """Test 30 epochs on far-apart blobs reach 95% training accuracy."""
    stream = TaskStream(tasks=[separable_task], classes_per_task=2)
    config = TrainConfig(epochs=30, batch_current=12, batch_previous=4, hidden=16)
    model = TinyModel.from_config(config, stream.in_shape, 2, seed=0)

    train_task(model, stream, 1, config)

    accuracy = np.mean(model.predict(separable_task.train_x) == separable_task.train_y)
    assert accuracy >= 0.95


def test_zero_epochs_leave_model_unchanged(separable_task):
    """Test no training happens with zero epochs."""
    stream = TaskStream(tasks=[separable_task], classes_per_task=2)
    config = TrainConfig(epochs=0)
    model = TinyModel.from_config(config, stream.in_shape, 2, seed=0)
    before = model.state_dict()

    train_task(model, stream, 1, config)

    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(value, before[name])


def test_training_is_deterministic(separable_task):
    """Test equal seeds give identical parameters."""
    stream = TaskStream(tasks=[separable_task], classes_per_task=2)
    config = TrainConfig(epochs=3, batch_current=12, norm="tbbn", hidden=8)
    states = []
    for _ in range(2):
        model = TinyModel.from_config(config, stream.in_shape, 2, seed=4)
        train_task(model, stream, 1, config)
        states.append(model.state_dict())

    for name in states[0]:
        np.testing.assert_array_equal(states[0][name], states[1][name])


def test_head_must_cover_seen_classes(small_stream, small_train_config):
    """Test training task 2 with a two-class head is rejected."""
    model = TinyModel.from_config(small_train_config, small_stream.in_shape, 2, seed=0)

    with pytest.raises(HarnessError):
        train_task(model, small_stream, 2, small_train_config)


def test_empty_memory_trains_without_replay(small_stream, small_train_config, caplog):
    """Test a missing memory at t=2 logs a warning and still trains."""
    model = TinyModel.from_config(small_train_config, small_stream.in_shape, 4, seed=0)

    with caplog.at_level(logging.WARNING):
        train_task(model, small_stream, 2, small_train_config, memory=None)

    assert "memory is empty" in caplog.text


def test_non_finite_input_is_a_numeric_failure():
    """Test infinite features abort training."""
    model = TinyModel((4, 1, 1), 2, hidden=8)
    batch = TaskBatch(np.full((4, 4, 1, 1), np.inf), np.array([0, 1, 0, 1]), BatchComposition.plain(4))

    with pytest.raises(NumericFailureError):
        fit_batches(model, [batch], lr=0.1, weight_decay=0.0)


def test_fit_batches_without_batches_returns_nan():
    """Test the mean loss of no steps is NaN."""
    assert np.isnan(fit_batches(TinyModel((4, 1, 1), 2), [], 0.1, 0.0))


def test_evaluate_is_deterministic(small_stream):
    """Test repeated evaluation gives the same accuracies."""
    model = TinyModel(small_stream.in_shape, 4, hidden=8, groups=2)

    first = evaluate(model, small_stream, 2)
    second = evaluate(model, small_stream, 2)

    assert first.shape == (2,)
    np.testing.assert_array_equal(first, second)
    assert np.all((first >= 0.0) & (first <= 1.0))


def test_evaluate_memorized_task(separable_task):
    """Test a trained model scores close to 1 when test equals train."""
    stream = TaskStream(tasks=[separable_task], classes_per_task=2)
    config = TrainConfig(epochs=30, batch_current=12, hidden=16)
    model = TinyModel.from_config(config, stream.in_shape, 2, seed=1)
    train_task(model, stream, 1, config)

    assert evaluate(model, stream, 1)[0] >= 0.95


@pytest.mark.parametrize("norm", ["bn", "gn", "cn", "tbbn"])
def test_run_cil_fills_matrix(small_stream, small_train_config, norm):
    """Test a full run fills every lower-triangular entry for each normalization."""
    config = small_train_config.model_copy(update={"norm": norm})

    run = run_cil(small_stream, config, seed=0)

    assert run.matrix.is_complete()
    assert run.model.num_classes == 4
    assert len(run.memory) <= config.memory_size
    assert run.memory.class_counts() == {0: 5, 1: 5, 2: 5, 3: 5}


def test_run_cil_is_deterministic(small_stream, small_train_config):
    """Test (seed, config) fixes the accuracy matrix."""
    config = small_train_config.model_copy(update={"norm": "tbbn"})

    first = run_cil(small_stream, config, seed=2)
    second = run_cil(small_stream, config, seed=2)

    assert first.matrix == second.matrix


def test_train_joint_grows_head(small_stream, small_train_config):
    """Test joint training widens the head to every class."""
    model = TinyModel.from_config(small_train_config, small_stream.in_shape, 2, seed=0)

    train_joint(model, small_stream, small_train_config)

    assert model.num_classes == 4
