"""
Custom exceptions for normalization layers.
"""


class NormLayerError(Exception):
    """Base exception for all normalization-layer errors."""

    pass


class CacheReuseError(NormLayerError):
    """Raised when a backward cache is consumed twice or is missing."""

    pass


class SplitFactorError(NormLayerError):
    """Raised when the split factor r cannot be computed for a batch."""

    pass


class DegenerateBatchError(NormLayerError):
    """Raised when a batch is too small for meaningful statistics."""

    pass
