"""
Stateful normalization layers used by the CIL harness.

Each layer owns a NormLayerState and at most one pending backward cache.
"""
from abc import ABC, abstractmethod
import logging
from typing import Dict, Optional, Set, Tuple

import numpy as np

from src.models import AblationFlags, NormKind
from src.norm.batchnorm import (
    affine,
    bn_backward,
    bn_eval_backward,
    bn_forward_eval,
    bn_forward_train,
)
from src.norm.exceptions import CacheReuseError, NormLayerError
from src.norm.groupnorm import (
    cn_backward,
    cn_forward_eval,
    cn_forward_train,
    gn_backward,
    gn_forward_train,
)
from src.norm.split import compute_r, feasible_r
from src.norm.state import BackwardCache, BatchComposition, make_state
from src.norm.tbbn import tbbn_backward, tbbn_forward_eval, tbbn_forward_train
from src.tensor import Tensor, as_tensor, broadcast_channels

logger = logging.getLogger(__name__)


class NormLayer(ABC):
    """
    Base class for all normalization layers.

    Subclasses implement the train and eval maps and their gradients;
    the base class handles caching and parameter bookkeeping.
    """

    kind: NormKind

    def __init__(
        self,
        channels: int,
        groups: int = 1,
        bessel: bool = False,
        ablation: Optional[AblationFlags] = None,
        epsilon: float = 1e-5,
        momentum_new: float = 0.1,
    ):
        """
        Initialize the layer.

        Args:
            channels: Number of channels C
            groups: GN group count (ignored by BN/TBBN)
            bessel: Use the (V-1)/V factor on the running variance
            ablation: TBBN component toggles
            epsilon: Variance epsilon
            momentum_new: EMA weight on fresh batch statistics
        """
        self.state = make_state(
            channels,
            epsilon=epsilon,
            momentum_new=momentum_new,
            bessel=bessel,
            groups=groups,
            ablation=ablation,
        )
        self.grads: Dict[str, np.ndarray] = {}
        self._cache: Optional[BackwardCache] = None
        self._eval_input: Optional[Tensor] = None

    @property
    def has_running_stats(self) -> bool:
        return True

    def params(self) -> Dict[str, np.ndarray]:
        """Trainable arrays, updated in place by the optimizer."""
        return {"gamma": self.state.gamma, "beta": self.state.beta}

    def forward(
        self,
        x: Tensor,
        train: bool,
        composition: Optional[BatchComposition] = None,
        keep_graph: bool = False,
    ) -> Tensor:
        """
        Run the layer.

        Args:
            x: Input tensor
            train: Use batch statistics and update running statistics
            composition: Batch layout, defaults to a single-task batch
            keep_graph: In eval mode, remember the input for a backward pass

        Returns:
            Output tensor of the same shape
        """
        x = as_tensor(x)
        if train:
            comp = composition or BatchComposition.plain(x.shape[0])
            y, self._cache = self._forward_train(x, comp)
            self._eval_input = None
            return y
        self._cache = None
        self._eval_input = x if keep_graph else None
        return self._forward_eval(x)

    def backward(self, d_y: Tensor) -> Tensor:
        """
        Back-propagate through the last forward call.

        Gradients of gamma and beta are stored in ``self.grads``.

        Raises:
            CacheReuseError: If there is no pending forward pass
        """
        if self._cache is not None:
            cache, self._cache = self._cache, None
            d_x, d_gamma, d_beta = self._backward_train(d_y, cache)
        elif self._eval_input is not None:
            x, self._eval_input = self._eval_input, None
            d_x, d_gamma, d_beta = self._backward_eval(d_y, x)
        else:
            raise CacheReuseError(f"{self.kind} layer has no pending forward pass")
        self.grads = {"gamma": d_gamma, "beta": d_beta}
        return d_x

    def stats_input(self, x: Tensor) -> Tensor:
        """Tensor whose channel statistics the running estimates track."""
        return as_tensor(x)

    def set_running_stats(self, mean: np.ndarray, var: np.ndarray) -> None:
        """Overwrite the running statistics (oracle recomputation)."""
        if not self.has_running_stats:
            return
        self.state.running_mean = np.asarray(mean, dtype=np.float64).copy()
        self.state.running_var = np.maximum(np.asarray(var, dtype=np.float64), 0.0)

    @abstractmethod
    def _forward_train(
        self, x: Tensor, comp: BatchComposition
    ) -> Tuple[Tensor, BackwardCache]:
        pass

    @abstractmethod
    def _forward_eval(self, x: Tensor) -> Tensor:
        pass

    @abstractmethod
    def _backward_train(self, d_y: Tensor, cache: BackwardCache):
        pass

    def _backward_eval(self, d_y: Tensor, x: Tensor):
        return bn_eval_backward(d_y, x, self.state)


class BatchNorm(NormLayer):
    """Vanilla batch normalization."""

    kind = "bn"

    def _forward_train(self, x, comp):
        return bn_forward_train(x, self.state)

    def _forward_eval(self, x):
        return bn_forward_eval(x, self.state)

    def _backward_train(self, d_y, cache):
        return bn_backward(d_y, cache, self.state)


class GroupNorm(NormLayer):
    """Group normalization followed by a per-channel affine; no running stats."""

    kind = "gn"

    @property
    def has_running_stats(self) -> bool:
        return False

    def _forward(self, x):
        g, cache = gn_forward_train(x, self.state.groups, self.state.epsilon)
        return affine(g, self.state.gamma, self.state.beta), BackwardCache(
            "gn-affine", gn=cache, g=g
        )

    def _forward_train(self, x, comp):
        return self._forward(x)

    def _forward_eval(self, x):
        y, _ = self._forward(x)
        return y

    def _backward_train(self, d_y, cache):
        values = cache.take("gn-affine")
        d_y = as_tensor(d_y, "d_y")
        g = values["g"]
        d_gamma = (d_y * g).sum(axis=(0, 2, 3))
        d_beta = d_y.sum(axis=(0, 2, 3))
        d_x = gn_backward(d_y * broadcast_channels(self.state.gamma), values["gn"])
        return d_x, d_gamma, d_beta

    def _backward_eval(self, d_y, x):
        _, cache = self._forward(x)
        return self._backward_train(d_y, cache)


class ContinualNorm(NormLayer):
    """Group normalization (no affine) followed by batch normalization."""

    kind = "cn"

    def _forward_train(self, x, comp):
        return cn_forward_train(x, self.state)

    def _forward_eval(self, x):
        return cn_forward_eval(x, self.state)

    def _backward_train(self, d_y, cache):
        return cn_backward(d_y, cache, self.state)

    def _backward_eval(self, d_y, x):
        g, gn_cache = gn_forward_train(x, self.state.groups, self.state.epsilon)
        d_g, d_gamma, d_beta = bn_eval_backward(d_y, g, self.state)
        return gn_backward(d_g, gn_cache), d_gamma, d_beta

    def stats_input(self, x):
        g, _ = gn_forward_train(x, self.state.groups, self.state.epsilon)
        return g


class TaskBalancedBatchNorm(NormLayer):
    """Batch normalization with task-balanced statistics and affine gradients."""

    kind = "tbbn"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._seen_plans: Set[Tuple[int, int, int]] = set()

    def split_plan(self, comp: BatchComposition) -> Tuple[int, int]:
        """
        (r, r*) for a composition, logged the first time it is seen.
        """
        if comp.task >= 2 and comp.batch_previous == 0:
            return 1, 1
        r = compute_r(comp.batch_current, comp.batch_previous, comp.task)
        r_star = feasible_r(comp.batch_current, comp.batch_previous, r)
        key = (comp.batch_current, comp.batch_previous, comp.task)
        if key not in self._seen_plans:
            self._seen_plans.add(key)
            if r_star != r:
                logger.info(
                    f"task {comp.task}: r={r} is not a common divisor of "
                    f"B_c={comp.batch_current}, B_p={comp.batch_previous}; using r*={r_star}"
                )
            else:
                logger.info(f"task {comp.task}: r*={r_star}")
        return r, r_star

    def _forward_train(self, x, comp):
        self.split_plan(comp)
        return tbbn_forward_train(x, comp, self.state)

    def _forward_eval(self, x):
        return tbbn_forward_eval(x, self.state)

    def _backward_train(self, d_y, cache):
        return tbbn_backward(d_y, cache, self.state)


LAYER_TYPES = {
    "bn": BatchNorm,
    "gn": GroupNorm,
    "cn": ContinualNorm,
    "tbbn": TaskBalancedBatchNorm,
}


def make_norm_layer(
    kind: NormKind,
    channels: int,
    groups: int = 1,
    bessel: bool = False,
    ablation: Optional[AblationFlags] = None,
) -> NormLayer:
    """
    Build a normalization layer by kind name.

    Raises:
        NormLayerError: For an unknown kind
    """
    if kind not in LAYER_TYPES:
        raise NormLayerError(f"Unknown normalization kind: {kind}")
    if kind in ("bn", "tbbn"):
        groups = 1
    return LAYER_TYPES[kind](channels, groups=groups, bessel=bessel, ablation=ablation)
