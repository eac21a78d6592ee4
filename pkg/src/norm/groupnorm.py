"""
Group normalization (no affine) and Continual Normalization (GN then BN).
"""
from typing import Tuple

import numpy as np

from src.norm.batchnorm import Vector, bn_backward, bn_forward_eval, bn_forward_train
from src.norm.exceptions import NormLayerError
from src.norm.state import BackwardCache, NormLayerState
from src.tensor import Tensor, as_tensor


def _grouped(x: Tensor, groups: int) -> np.ndarray:
    b, c, h, w = x.shape
    if groups < 1 or c % groups != 0:
        raise NormLayerError(f"group count {groups} does not divide channels {c}")
    # channels of one group are contiguous in NCHW, so this is a plain view
    return x.reshape(b, groups, (c // groups) * h * w)


def gn_forward_train(
    x: Tensor, groups: int, epsilon: float = 1e-5
) -> Tuple[Tensor, BackwardCache]:
    """
    Standardize every (sample, group) slice to zero mean and unit variance.

    Args:
        x: Tensor of shape (B, C, H, W)
        groups: G, must divide C
        epsilon: Variance epsilon

    Returns:
        Tuple (y, cache)

    Raises:
        NormLayerError: If G does not divide C
    """
    x = as_tensor(x)
    flat = _grouped(x, groups)
    mean = flat.mean(axis=2, keepdims=True)
    centered = flat - mean
    var = (centered * centered).mean(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + epsilon)
    x_hat = centered * inv_std
    cache = BackwardCache("gn", x_hat=x_hat, inv_std=inv_std, shape=x.shape)
    return x_hat.reshape(x.shape), cache


def gn_forward_eval(x: Tensor, groups: int, epsilon: float = 1e-5) -> Tensor:
    """Same map as training; GN keeps no running statistics."""
    y, _ = gn_forward_train(x, groups, epsilon)
    return y


def gn_backward(d_y: Tensor, cache: BackwardCache) -> Tensor:
    """
    Gradient of :func:`gn_forward_train` with respect to its input.

    Raises:
        CacheReuseError: If the cache was already consumed
    """
    values = cache.take("gn")
    x_hat = values["x_hat"]
    inv_std = values["inv_std"]
    shape = values["shape"]
    d = as_tensor(d_y, "d_y").reshape(x_hat.shape)
    count = x_hat.shape[2]
    sum_d = d.sum(axis=2, keepdims=True)
    sum_dx = (d * x_hat).sum(axis=2, keepdims=True)
    d_x = (inv_std / count) * (count * d - sum_d - x_hat * sum_dx)
    return d_x.reshape(shape)


def cn_forward_train(x: Tensor, state: NormLayerState) -> Tuple[Tensor, BackwardCache]:
    """
    Continual Normalization: GN over state.groups, then train-mode BN.

    The BN stage owns gamma, beta and the running statistics.
    """
    g, gn_cache = gn_forward_train(x, state.groups, state.epsilon)
    y, bn_cache = bn_forward_train(g, state)
    return y, BackwardCache("cn", gn=gn_cache, bn=bn_cache)


def cn_forward_eval(x: Tensor, state: NormLayerState) -> Tensor:
    """GN per sample, then BN with running statistics."""
    return bn_forward_eval(gn_forward_eval(x, state.groups, state.epsilon), state)


def cn_backward(
    d_y: Tensor, cache: BackwardCache, state: NormLayerState
) -> Tuple[Tensor, Vector, Vector]:
    """
    Gradients of :func:`cn_forward_train`.

    Returns:
        Tuple (d_x, d_gamma, d_beta)
    """
    values = cache.take("cn")
    d_g, d_gamma, d_beta = bn_backward(d_y, values["bn"], state)
    return gn_backward(d_g, values["gn"]), d_gamma, d_beta
