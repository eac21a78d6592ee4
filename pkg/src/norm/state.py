"""
Per-layer state, batch composition and backward caches.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np
from numpy.typing import NDArray

from src.models import AblationFlags
from src.norm.exceptions import CacheReuseError, NormLayerError


@dataclass
class NormLayerState:
    """
    Learnable parameters, running statistics and hyperparameters of one layer.

    Attributes:
        gamma: Per-channel scale (init 1)
        beta: Per-channel shift (init 0)
        running_mean: EMA of batch means (init 0)
        running_var: EMA of batch variances (init 1)
        epsilon: Added to the variance under the square root
        momentum_new: Weight of the fresh batch statistic in the EMA
        bessel_on_running_var: Scale the old running variance by (V-1)/V
        groups: Group count for the GN stage of CN/GN
        ablation: TBBN component toggles
    """

    gamma: NDArray[np.float64]
    beta: NDArray[np.float64]
    running_mean: NDArray[np.float64]
    running_var: NDArray[np.float64]
    epsilon: float = 1e-5
    momentum_new: float = 0.1
    bessel_on_running_var: bool = False
    groups: int = 1
    ablation: AblationFlags = field(default_factory=AblationFlags)

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])

    def copy(self) -> "NormLayerState":
        """Deep copy of arrays; flags are immutable and shared."""
        return replace(
            self,
            gamma=self.gamma.copy(),
            beta=self.beta.copy(),
            running_mean=self.running_mean.copy(),
            running_var=self.running_var.copy(),
        )

    def update_running(
        self, mean: NDArray[np.float64], var: NDArray[np.float64], count: int
    ) -> None:
        """
        Fold one batch's statistics into the running estimates.

        new_mean = (1-a)*old + a*mean
        new_var  = (1-a)*f*old + a*var, f = (V-1)/V if bessel else 1

        Args:
            mean: Per-channel batch mean
            var: Per-channel biased batch variance
            count: V, number of elements each statistic was reduced over
        """
        alpha = self.momentum_new
        factor = (count - 1) / count if self.bessel_on_running_var and count > 0 else 1.0
        self.running_mean = (1.0 - alpha) * self.running_mean + alpha * mean
        self.running_var = (1.0 - alpha) * factor * self.running_var + alpha * var
        # guard against -0.0 / rounding below zero
        np.maximum(self.running_var, 0.0, out=self.running_var)


def make_state(
    channels: int,
    epsilon: float = 1e-5,
    momentum_new: float = 0.1,
    bessel: bool = False,
    groups: int = 1,
    ablation: Optional[AblationFlags] = None,
) -> NormLayerState:
    """
    Create a freshly initialized layer state.

    Args:
        channels: Number of channels C
        epsilon: Variance epsilon
        momentum_new: EMA weight on the new statistic
        bessel: Apply the (V-1)/V factor to the old running variance
        groups: GN group count (CN/GN only)
        ablation: TBBN toggles, full TBBN if omitted

    Returns:
        NormLayerState with gamma=1, beta=0, running_mean=0, running_var=1
    """
    if channels < 1:
        raise NormLayerError(f"channels must be >= 1, got {channels}")
    if groups < 1 or channels % groups != 0:
        raise NormLayerError(f"group count {groups} must divide channels {channels}")
    return NormLayerState(
        gamma=np.ones(channels),
        beta=np.zeros(channels),
        running_mean=np.zeros(channels),
        running_var=np.ones(channels),
        epsilon=epsilon,
        momentum_new=momentum_new,
        bessel_on_running_var=bessel,
        groups=groups,
        ablation=ablation if ablation is not None else AblationFlags(),
    )


@dataclass(frozen=True)
class BatchComposition:
    """
    Layout of a composed mini-batch: B_c current rows, then B_p exemplar rows.

    Attributes:
        batch_current: B_c (>= 1)
        batch_previous: B_p (>= 0)
        task: 1-based task index t
    """

    batch_current: int
    batch_previous: int
    task: int

    def __post_init__(self):
        if self.batch_current < 1:
            raise NormLayerError(f"B_c must be >= 1, got {self.batch_current}")
        if self.batch_previous < 0:
            raise NormLayerError(f"B_p must be >= 0, got {self.batch_previous}")
        if self.task < 1:
            raise NormLayerError(f"task index must be >= 1, got {self.task}")

    @property
    def size(self) -> int:
        return self.batch_current + self.batch_previous

    @classmethod
    def plain(cls, batch_size: int) -> "BatchComposition":
        """A single-task batch (t=1, no exemplars)."""
        return cls(batch_current=batch_size, batch_previous=0, task=1)


class BackwardCache:
    """
    Opaque bundle of forward intermediates, consumable exactly once.
    """

    def __init__(self, kind: str, **values: Any):
        self.kind = kind
        self._values: Dict[str, Any] = values
        self._consumed = False

    def take(self, kind: str) -> Dict[str, Any]:
        """
        Hand the stored values to a backward pass and mark the cache spent.

        Raises:
            CacheReuseError: If already consumed or produced by another layer kind
        """
        if self._consumed:
            raise CacheReuseError(f"{self.kind} backward cache was already consumed")
        if kind != self.kind:
            raise CacheReuseError(
                f"cache from a {self.kind} forward passed to {kind} backward"
            )
        self._consumed = True
        return self._values

    @property
    def consumed(self) -> bool:
        return self._consumed
