"""
Task-Balanced Batch Normalization.

During training the current-task rows are folded into r channel splits and
the exemplar rows are tiled r times along the channel axis. The two parts
are stacked along the batch axis into a balanced batch of shape
(B_c/r + B_p, C*r, H, W), in which every split sees each task about equally
often. Statistics and the affine transform are computed on that batch. The
result is then folded back to (B, C, H, W). Evaluation is plain BN.
"""
import logging
from typing import Tuple

from src.norm.batchnorm import (
    Vector,
    affine,
    bn_forward_eval,
    normalize,
    standardize_backward,
)
from src.norm.exceptions import DegenerateBatchError, NormLayerError
from src.norm.split import split_factor
from src.norm.state import BackwardCache, BatchComposition, NormLayerState
from src.tensor import (
    Tensor,
    as_tensor,
    average_channel_groups,
    broadcast_channels,
    channel_stats,
    concat_batch,
    fold_vector,
    repeat_channels,
    reshape_merge,
    reshape_split,
    split_batch,
    sum_channel_groups,
    tile_vector,
)

logger = logging.getLogger(__name__)


def resolve_split(comp: BatchComposition) -> int:
    """
    r* for a composition, falling back to 1 when no exemplars are present.

    An empty exemplar part at t >= 2 leaves the split factor undefined; the
    layer then behaves as vanilla BN.
    """
    if comp.task >= 2 and comp.batch_previous == 0:
        logger.warning(
            f"task {comp.task} batch has no exemplar rows; falling back to plain BN"
        )
        return 1
    r = split_factor(comp.batch_current, comp.batch_previous, comp.task)
    assert comp.batch_current % r == 0, "r* must divide B_c"
    return r


def balance(x: Tensor, batch_current: int, r: int) -> Tensor:
    """Build the balanced batch: reshape_split(current) stacked over repeat(previous)."""
    current, previous = split_batch(x, batch_current)
    return concat_batch(reshape_split(current, r), repeat_channels(previous, r))


def unbalance(h: Tensor, rows_current: int, r: int) -> Tensor:
    """Fold a balanced batch back: reshape_merge(current) over average(previous)."""
    current, previous = split_batch(h, rows_current)
    return concat_batch(reshape_merge(current, r), average_channel_groups(previous, r))


def _unbalance_grad(d_y: Tensor, batch_current: int, r: int) -> Tensor:
    # adjoint of unbalance: split the current part, spread exemplar grads as g/r
    current, previous = split_batch(d_y, batch_current)
    return concat_batch(reshape_split(current, r), repeat_channels(previous, r) / r)


def _balance_grad(d_h: Tensor, rows_current: int, r: int) -> Tensor:
    # adjoint of balance: merge the current part, sum exemplar copies
    current, previous = split_batch(d_h, rows_current)
    return concat_batch(reshape_merge(current, r), sum_channel_groups(previous, r))


def tbbn_forward_train(
    x: Tensor, comp: BatchComposition, state: NormLayerState
) -> Tuple[Tensor, BackwardCache]:
    """
    Train-mode TBBN forward pass.

    Args:
        x: Tensor (B, C, H, W) with the B_c current rows first
        comp: Batch composition (B_c, B_p, t)
        state: Layer state; running statistics are updated in place

    Returns:
        Tuple (y, cache), y with the same shape as x

    Raises:
        NormLayerError: If the batch size disagrees with the composition
        DegenerateBatchError: If the balanced batch has fewer than 2 elements
            per channel
    """
    x = as_tensor(x)
    b, c, h, w = x.shape
    if b != comp.size:
        raise NormLayerError(
            f"batch of {b} rows does not match composition B_c={comp.batch_current}, "
            f"B_p={comp.batch_previous}"
        )
    if c != state.channels:
        raise NormLayerError(f"input has {c} channels, layer has {state.channels}")

    flags = state.ablation
    r = resolve_split(comp)
    rows_current = comp.batch_current // r

    balanced = balance(x, comp.batch_current, r)
    count_balanced = balanced.shape[0] * h * w
    if count_balanced < 2 or b * h * w < 2:
        raise DegenerateBatchError(
            f"balanced batch has {count_balanced} elements per channel"
        )
    bal_mean, bal_var = channel_stats(balanced)
    plain_mean, plain_var = channel_stats(x)

    if flags.balanced_stats_train:
        normalized, inv_std = normalize(balanced, bal_mean, bal_var, state.epsilon)
        x_hat_plain = None
    else:
        # same values as normalizing the balanced batch with the plain
        # statistics tiled r times
        x_hat_plain, inv_std = normalize(x, plain_mean, plain_var, state.epsilon)
        normalized = balance(x_hat_plain, comp.batch_current, r)

    if flags.balanced_affine:
        y_balanced = affine(
            normalized, tile_vector(state.gamma, r), tile_vector(state.beta, r)
        )
        y = unbalance(y_balanced, rows_current, r)
        normalized_unbalanced = None
    else:
        normalized_unbalanced = unbalance(normalized, rows_current, r)
        y = affine(normalized_unbalanced, state.gamma, state.beta)

    if flags.balanced_stats_test:
        state.update_running(
            fold_vector(bal_mean, r, "mean"),
            fold_vector(bal_var, r, "mean"),
            count_balanced,
        )
    else:
        state.update_running(plain_mean, plain_var, b * h * w)

    cache = BackwardCache(
        "tbbn",
        r=r,
        batch_current=comp.batch_current,
        rows_current=rows_current,
        flags=flags,
        normalized=normalized,
        normalized_unbalanced=normalized_unbalanced,
        x_hat_plain=x_hat_plain,
        inv_std=inv_std,
    )
    return y, cache


def tbbn_forward_eval(x: Tensor, state: NormLayerState) -> Tensor:
    """Identical to :func:`bn_forward_eval`."""
    return bn_forward_eval(x, state)


def tbbn_backward(
    d_y: Tensor, cache: BackwardCache, state: NormLayerState
) -> Tuple[Tensor, Vector, Vector]:
    """
    Gradients of :func:`tbbn_forward_train`.

    The upstream gradient is routed into the balanced layout (current rows
    reshaped into splits, exemplar rows tiled with weight 1/r), the affine
    gradients are taken over the balanced batch and summed over the r
    channel blocks, and the input gradient is chained back through the
    normalization and the layout operations.

    Returns:
        Tuple (d_x, d_gamma, d_beta)

    Raises:
        CacheReuseError: If the cache was already consumed
    """
    values = cache.take("tbbn")
    d_y = as_tensor(d_y, "d_y")
    r = values["r"]
    batch_current = values["batch_current"]
    rows_current = values["rows_current"]
    flags = values["flags"]
    normalized = values["normalized"]
    axes = (0, 2, 3)

    if flags.balanced_affine:
        d_balanced_y = _unbalance_grad(d_y, batch_current, r)
        d_gamma = fold_vector((d_balanced_y * normalized).sum(axis=axes), r, "sum")
        d_beta = fold_vector(d_balanced_y.sum(axis=axes), r, "sum")
        d_normalized = d_balanced_y * broadcast_channels(tile_vector(state.gamma, r))
    else:
        normalized_unbalanced = values["normalized_unbalanced"]
        d_gamma = (d_y * normalized_unbalanced).sum(axis=axes)
        d_beta = d_y.sum(axis=axes)
        d_normalized = _unbalance_grad(
            d_y * broadcast_channels(state.gamma), batch_current, r
        )

    if flags.balanced_stats_train:
        d_balanced = standardize_backward(d_normalized, normalized, values["inv_std"])
        d_x = _balance_grad(d_balanced, rows_current, r)
    else:
        d_x_hat = _balance_grad(d_normalized, rows_current, r)
        d_x = standardize_backward(d_x_hat, values["x_hat_plain"], values["inv_std"])

    return d_x, d_gamma, d_beta


def balanced_batch_stats(x: Tensor, comp: BatchComposition) -> Tuple[Vector, Vector]:
    """
    Split-averaged task-balanced mean and variance of one batch.

    These are the per-channel statistics TBBN feeds into its running
    estimates.
    """
    r = resolve_split(comp)
    mean, var = channel_stats(balance(as_tensor(x), comp.batch_current, r))
    return fold_vector(mean, r, "mean"), fold_vector(var, r, "mean")
