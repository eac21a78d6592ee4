"""
Custom exceptions for CIL metrics.
"""


class MetricsError(Exception):
    """Base exception for metric computation errors."""

    pass


class UnseenClassError(MetricsError):
    """Raised when a prediction or label refers to a class no task owns."""

    pass
