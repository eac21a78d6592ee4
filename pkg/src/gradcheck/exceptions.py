"""
Custom exceptions for finite-difference gradient checks.
"""


class GradCheckError(Exception):
    """Base exception for gradient-check errors."""

    pass


class NonFiniteValueError(GradCheckError):
    """Raised when the checked map returns NaN or Inf at a perturbed point."""

    pass
