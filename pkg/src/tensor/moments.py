"""
Exact per-channel mean and variance accumulated over many batches.
"""
import numpy as np
from numpy.typing import NDArray

from src.tensor.exceptions import EmptyReductionError
from src.tensor.ops import Tensor, as_tensor, channel_stats


class ChannelMoments:
    """
    Running per-channel count, mean and sum of squared deviations.

    Batches are merged with the pairwise update of Chan et al., so the result
    equals the statistics of the concatenated data up to rounding.
    """

    def __init__(self):
        self.count = 0
        self._mean = None
        self._m2 = None

    def push(self, x: Tensor) -> None:
        """Fold one (B, C, H, W) batch into the aggregate."""
        x = as_tensor(x)
        n = x.shape[0] * x.shape[2] * x.shape[3]
        if n == 0:
            return
        mean, var = channel_stats(x)
        if self.count == 0:
            self.count, self._mean, self._m2 = n, mean, var * n
            return
        total = self.count + n
        delta = mean - self._mean
        self._mean = self._mean + delta * (n / total)
        self._m2 = self._m2 + var * n + delta * delta * (self.count * n / total)
        self.count = total

    @property
    def mean(self) -> NDArray[np.float64]:
        self._require_stats()
        return self._mean

    @property
    def var(self) -> NDArray[np.float64]:
        """Biased variance (divisor = count)."""
        self._require_stats()
        return self._m2 / self.count

    def _require_stats(self):
        if self.count == 0:
            raise EmptyReductionError("no values pushed yet")
