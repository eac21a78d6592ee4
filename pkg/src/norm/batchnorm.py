"""
Batch normalization: train/eval forward passes and the analytic backward pass.
"""
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from src.norm.exceptions import DegenerateBatchError
from src.norm.state import BackwardCache, NormLayerState
from src.tensor import Tensor, as_tensor, broadcast_channels, channel_stats

Vector = NDArray[np.float64]


def normalize(
    x: Tensor, mean: Vector, var: Vector, epsilon: float
) -> Tuple[Tensor, Vector]:
    """
    Standardize per channel: (x - mean) / sqrt(var + eps).

    Returns:
        Tuple (x_hat, inv_std)
    """
    inv_std = 1.0 / np.sqrt(var + epsilon)
    x_hat = (x - broadcast_channels(mean)) * broadcast_channels(inv_std)
    return x_hat, inv_std


def affine(x_hat: Tensor, gamma: Vector, beta: Vector) -> Tensor:
    """Per-channel scale and shift."""
    return broadcast_channels(gamma) * x_hat + broadcast_channels(beta)


def standardize_backward(d_xhat: Tensor, x_hat: Tensor, inv_std: Vector) -> Tensor:
    """
    Gradient through x_hat = (x - mean(x)) * inv_std(x) with batch statistics.

    Mean and variance are taken per channel over batch and spatial axes of x,
    so the result includes their dependence on x.
    """
    axes = (0, 2, 3)
    count = x_hat.shape[0] * x_hat.shape[2] * x_hat.shape[3]
    sum_d = d_xhat.sum(axis=axes)
    sum_dx = (d_xhat * x_hat).sum(axis=axes)
    return (
        broadcast_channels(inv_std / count)
        * (
            count * d_xhat
            - broadcast_channels(sum_d)
            - x_hat * broadcast_channels(sum_dx)
        )
    )


def bn_forward_train(x: Tensor, state: NormLayerState) -> Tuple[Tensor, BackwardCache]:
    """
    Normalize with batch statistics and update running statistics in place.

    Args:
        x: Tensor of shape (B, C, H, W)
        state: Layer state; running_mean/running_var are updated

    Returns:
        Tuple (y, cache)

    Raises:
        DegenerateBatchError: If B*H*W < 2
    """
    x = as_tensor(x)
    b, _, h, w = x.shape
    count = b * h * w
    if count < 2:
        raise DegenerateBatchError(
            f"batch norm needs at least 2 elements per channel, got {count}"
        )
    mean, var = channel_stats(x)
    x_hat, inv_std = normalize(x, mean, var, state.epsilon)
    y = affine(x_hat, state.gamma, state.beta)
    state.update_running(mean, var, count)
    return y, BackwardCache("bn", x_hat=x_hat, inv_std=inv_std)


def bn_forward_eval(x: Tensor, state: NormLayerState) -> Tensor:
    """Normalize with the running statistics; the state is not modified."""
    x = as_tensor(x)
    x_hat, _ = normalize(x, state.running_mean, state.running_var, state.epsilon)
    return affine(x_hat, state.gamma, state.beta)


def bn_backward(
    d_y: Tensor, cache: BackwardCache, state: NormLayerState
) -> Tuple[Tensor, Vector, Vector]:
    """
    Gradients of a train-mode BN forward pass.

    Args:
        d_y: Upstream gradient, same shape as the forward output
        cache: Cache returned by :func:`bn_forward_train`
        state: Layer state (gamma is read)

    Returns:
        Tuple (d_x, d_gamma, d_beta)

    Raises:
        CacheReuseError: If the cache was already consumed
    """
    values = cache.take("bn")
    d_y = as_tensor(d_y, "d_y")
    x_hat = values["x_hat"]
    d_gamma = (d_y * x_hat).sum(axis=(0, 2, 3))
    d_beta = d_y.sum(axis=(0, 2, 3))
    d_xhat = d_y * broadcast_channels(state.gamma)
    d_x = standardize_backward(d_xhat, x_hat, values["inv_std"])
    return d_x, d_gamma, d_beta


def bn_eval_backward(
    d_y: Tensor, x: Tensor, state: NormLayerState
) -> Tuple[Tensor, Vector, Vector]:
    """
    Gradients of the eval-mode map, where running statistics are constants.

    Used when only the affine parameters are retrained on frozen statistics.
    """
    d_y = as_tensor(d_y, "d_y")
    x_hat, inv_std = normalize(
        as_tensor(x), state.running_mean, state.running_var, state.epsilon
    )
    d_gamma = (d_y * x_hat).sum(axis=(0, 2, 3))
    d_beta = d_y.sum(axis=(0, 2, 3))
    d_x = d_y * broadcast_channels(state.gamma * inv_std)
    return d_x, d_gamma, d_beta
