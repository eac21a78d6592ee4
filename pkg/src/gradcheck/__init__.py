"""
Finite-difference gradient oracle and layer-level checks.
"""
from src.gradcheck.exceptions import GradCheckError, NonFiniteValueError
from src.gradcheck.oracle import (
    check_gradients,
    numerical_gradient,
    relative_error,
)
from src.gradcheck.layers import check_layer

__all__ = [
    "GradCheckError",
    "NonFiniteValueError",
    "check_gradients",
    "numerical_gradient",
    "relative_error",
    "check_layer",
]
