"""
Custom exceptions for experiment drivers.
"""


class ExperimentError(Exception):
    """Base exception for experiment errors."""

    pass


class ConfigError(ExperimentError):
    """Raised when a run configuration is invalid or unreadable."""

    pass


class CheckpointError(ExperimentError):
    """Raised when a checkpoint cannot be written or read back."""

    pass
