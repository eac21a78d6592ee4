"""
Custom exceptions for tensor-core operations.
"""


class TensorError(Exception):
    """Base exception for all tensor-related errors."""

    pass


class ShapeError(TensorError):
    """Raised when a tensor has the wrong rank or mismatched extents."""

    pass


class PreconditionError(TensorError):
    """Raised when an operation's divisibility or range precondition fails."""

    pass


class EmptyReductionError(TensorError):
    """Raised when a reduction is asked to run over zero elements."""

    pass
