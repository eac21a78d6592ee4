"""
Custom exceptions for the class-incremental learning harness.
"""


class HarnessError(Exception):
    """Base exception for CIL harness errors."""

    pass


class EmptySourceError(HarnessError):
    """Raised when a batch is requested from an empty dataset or memory."""

    pass


class IdxFormatError(HarnessError):
    """Raised when an IDX file is malformed."""

    pass


class NumericFailureError(HarnessError):
    """Raised when training produces a non-finite loss or parameter."""

    pass
