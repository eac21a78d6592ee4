"""
Pytest configuration and fixtures for testing.
"""
import os

import numpy as np
import pytest

from src.models import RunConfig, StreamConfig, TrainConfig


@pytest.fixture(scope="session", autouse=True)
def setup_test_env():
    """Set up test environment variables before any tests run."""
    os.environ["TBNORM_ENVIRONMENT"] = "test"
    os.environ["TBNORM_LOG_LEVEL"] = "WARNING"

    # Clear any cached settings from src.config
    from src.config import get_settings

    get_settings.cache_clear()

    yield

    get_settings.cache_clear()


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_train_config():
    """Training knobs small enough for sub-second runs."""
    return TrainConfig(
        epochs=2,
        hidden=8,
        groups=2,
        memory_size=20,
        batch_current=12,
        batch_previous=4,
    )


@pytest.fixture
def small_stream_config():
    """Two tasks of two classes in four dimensions."""
    return StreamConfig(tasks=2, classes_per_task=2, dim=4, samples_per_class=30)


@pytest.fixture
def small_run_config(tmp_path, small_train_config, small_stream_config):
    """RunConfig writing into a temporary directory with a single seed."""
    return RunConfig(
        train=small_train_config,
        stream=small_stream_config,
        output_dir=tmp_path / "runs",
        seeds=[0],
        toy_batches=50,
        mc_batches=2000,
    )
