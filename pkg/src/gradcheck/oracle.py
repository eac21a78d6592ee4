"""
Central finite differences against analytic gradients.
"""
import logging
from typing import Callable, Dict, Mapping, Optional

import numpy as np
from numpy.typing import ArrayLike

from src.gradcheck.exceptions import GradCheckError, NonFiniteValueError
from src.models import BlockReport, GradReport

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_THRESHOLD = 1e-4
DENOMINATOR_FLOOR = 1e-8


def relative_error(analytic: ArrayLike, numeric: ArrayLike) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, 1e-8)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), DENOMINATOR_FLOOR)
    return np.abs(a - n) / scale


def numerical_gradient(
    forward: Callable[[np.ndarray], float],
    params: ArrayLike,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    """
    Central-difference gradient of a scalar map.

    Args:
        forward: Function of a flat parameter vector returning a scalar
        params: Point at which to differentiate
        step: Perturbation h

    Returns:
        Vector of (f(p + h e_i) - f(p - h e_i)) / 2h

    Raises:
        NonFiniteValueError: If any perturbed evaluation is NaN or Inf
    """
    theta = np.array(params, dtype=np.float64).ravel()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        original = theta[i]
        theta[i] = original + step
        f_plus = float(forward(theta.copy()))
        theta[i] = original - step
        f_minus = float(forward(theta.copy()))
        theta[i] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteValueError(
                f"forward map is not finite around coordinate {i} "
                f"(f+={f_plus}, f-={f_minus})"
            )
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def check_gradients(
    forward: Callable[[np.ndarray], float],
    params: ArrayLike,
    analytic: ArrayLike,
    step: float = DEFAULT_STEP,
    threshold: float = DEFAULT_THRESHOLD,
    blocks: Optional[Mapping[str, slice]] = None,
) -> GradReport:
    """
    Compare an analytic gradient with central finite differences.

    Args:
        forward: Deterministic scalar map of a flat parameter vector
        params: Flat parameter vector
        analytic: Claimed gradient, same length as params
        step: Finite-difference step
        threshold: Maximum allowed relative error
        blocks: Named slices of the parameter vector to report separately;
            a single block named "params" when omitted

    Returns:
        GradReport with per-block maximum and mean relative errors

    Raises:
        GradCheckError: If shapes disagree or step is not positive
        NonFiniteValueError: If the forward map is not finite at a perturbed point
    """
    theta = np.asarray(params, dtype=np.float64).ravel()
    claimed = np.asarray(analytic, dtype=np.float64).ravel()
    if theta.shape != claimed.shape:
        raise GradCheckError(
            f"analytic gradient has {claimed.size} entries, params have {theta.size}"
        )
    if step <= 0:
        raise GradCheckError(f"step must be positive, got {step}")
    if not np.all(np.isfinite(claimed)):
        raise NonFiniteValueError("analytic gradient contains NaN or Inf")

    numeric = numerical_gradient(forward, theta, step)
    errors = relative_error(claimed, numeric)

    layout: Dict[str, slice] = dict(blocks) if blocks else {"params": slice(0, theta.size)}
    reports = {}
    for name, block in layout.items():
        block_errors = errors[block]
        reports[name] = BlockReport(
            max_rel_error=float(block_errors.max()) if block_errors.size else 0.0,
            mean_rel_error=float(block_errors.mean()) if block_errors.size else 0.0,
            size=int(block_errors.size),
        )

    worst = max((b.max_rel_error for b in reports.values()), default=0.0)
    passed = bool(worst < threshold)
    if not passed:
        logger.warning(f"gradient check failed: max relative error {worst:.3e}")
    return GradReport(blocks=reports, step=step, threshold=threshold, passed=passed)
