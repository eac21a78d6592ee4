"""
Adaptive split factor r and its reshape-feasible correction r*.
"""
from fractions import Fraction
import logging
from typing import List

from src.norm.exceptions import SplitFactorError

logger = logging.getLogger(__name__)


def common_divisors(a: int, b: int) -> List[int]:
    """
    Ascending list of positive common divisors of ``a`` and ``b``.

    A zero argument contributes no constraint, so CD(a, 0) is the divisors of a.
    """
    a, b = abs(int(a)), abs(int(b))
    limit = max(a, b) if min(a, b) == 0 else min(a, b)
    return [d for d in range(1, limit + 1) if a % d == 0 and b % d == 0]


def compute_r(batch_current: int, batch_previous: int, task: int) -> int:
    """
    Split factor that makes B_c / r equal B_p / (t - 1).

    Args:
        batch_current: B_c, rows from the current task
        batch_previous: B_p, exemplar rows
        task: 1-based task index t

    Returns:
        1 for the first task, otherwise (B_c / B_p) * (t - 1)

    Raises:
        SplitFactorError: If B_p is zero for t >= 2 or the ratio is not integral
    """
    if task < 1:
        raise SplitFactorError(f"task index must be >= 1, got {task}")
    if task == 1:
        return 1
    if batch_previous <= 0:
        raise SplitFactorError(
            f"r is undefined for t={task} with B_p={batch_previous}"
        )
    r = Fraction(batch_current, batch_previous) * (task - 1)
    if r.denominator != 1:
        raise SplitFactorError(
            f"r = {batch_current}/{batch_previous} * {task - 1} = {r} is not an integer"
        )
    return int(r)


def feasible_r(batch_current: int, batch_previous: int, r: int) -> int:
    """
    Largest common divisor of B_c and B_p that does not exceed ``r``.

    Returns ``r`` itself when it already divides both, otherwise the largest
    common divisor strictly below it. Never less than 1.
    """
    if r < 1:
        raise SplitFactorError(f"r must be >= 1, got {r}")
    divisors = common_divisors(batch_current, batch_previous)
    if r in divisors:
        return r
    corrected = max(d for d in divisors if d < r)
    logger.debug(
        f"r={r} is not a common divisor of ({batch_current}, {batch_previous}); "
        f"using r*={corrected}"
    )
    return corrected


def split_factor(batch_current: int, batch_previous: int, task: int) -> int:
    """r* for a batch: feasible_r applied to compute_r."""
    return feasible_r(
        batch_current, batch_previous, compute_r(batch_current, batch_previous, task)
    )
