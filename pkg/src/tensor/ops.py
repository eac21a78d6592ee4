"""
Layout operations on dense NCHW tensors.

A tensor is a C-contiguous float64 ``numpy.ndarray`` of rank 4 laid out
batch -> channel -> row -> column, so the flat index of element (n, c, h, w)
is ((n*C + c)*H + h)*W + w. The split/merge/repeat/average operations below
are the building blocks of the task-balanced batch.
"""
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from src.tensor.exceptions import EmptyReductionError, PreconditionError, ShapeError

Tensor = NDArray[np.float64]


def as_tensor(x, name: str = "x") -> Tensor:
    """
    Validate and coerce an array-like into a rank-4 float64 tensor.

    Args:
        x: Array-like input
        name: Name used in error messages

    Returns:
        C-contiguous float64 array of rank 4

    Raises:
        ShapeError: If the input is not rank 4
    """
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"{name} must be rank 4 (N, C, H, W), got shape {arr.shape}")
    return arr


def _check_positive(r: int) -> int:
    if int(r) != r or r < 1:
        raise PreconditionError(f"split factor r must be a positive integer, got {r}")
    return int(r)


def reshape_split(x: Tensor, r: int) -> Tensor:
    """
    Fold groups of ``r`` consecutive rows into the channel axis.

    Row b, channel c lands at row b // r, channel (b % r)*C + c. This is the
    plain row-major reinterpretation (B, C, H, W) -> (B/r, C*r, H, W).

    Args:
        x: Tensor of shape (B, C, H, W)
        r: Split factor, must divide B

    Returns:
        Tensor of shape (B/r, C*r, H, W)

    Raises:
        PreconditionError: If r does not divide B
    """
    x = as_tensor(x)
    r = _check_positive(r)
    b, c, h, w = x.shape
    if b % r != 0:
        raise PreconditionError(
            f"reshape_split needs r to divide the batch: B_c={b}, r={r}"
        )
    return x.reshape(b // r, c * r, h, w).copy()


def reshape_merge(x: Tensor, r: int) -> Tensor:
    """
    Inverse of :func:`reshape_split`: (B, C*r, H, W) -> (B*r, C, H, W).

    Raises:
        PreconditionError: If r does not divide the channel extent
    """
    x = as_tensor(x)
    r = _check_positive(r)
    b, cr, h, w = x.shape
    if cr % r != 0:
        raise PreconditionError(
            f"reshape_merge needs r to divide the channels: C*r={cr}, r={r}"
        )
    return x.reshape(b * r, cr // r, h, w).copy()


def repeat_channels(x: Tensor, r: int) -> Tensor:
    """
    Tile the channel axis ``r`` times: output channel k*C + c copies channel c.

    Args:
        x: Tensor of shape (B, C, H, W)
        r: Number of copies

    Returns:
        Tensor of shape (B, C*r, H, W)
    """
    x = as_tensor(x)
    r = _check_positive(r)
    return np.tile(x, (1, r, 1, 1))


def average_channel_groups(x: Tensor, r: int) -> Tensor:
    """
    Average the ``r`` channel blocks of width C: (B, C*r, H, W) -> (B, C, H, W).

    Computed as block 0 plus the mean offset of every block from it, so that
    averaging identical copies returns the copy bit-for-bit.

    Raises:
        PreconditionError: If r does not divide the channel extent
    """
    x = as_tensor(x)
    r = _check_positive(r)
    b, cr, h, w = x.shape
    if cr % r != 0:
        raise PreconditionError(
            f"average_channel_groups needs r to divide the channels: C*r={cr}, r={r}"
        )
    blocks = x.reshape(b, r, cr // r, h, w)
    base = blocks[:, 0]
    if r == 1:
        return base.copy()
    return base + (blocks[:, 1:] - base[:, None]).sum(axis=1) / r


def sum_channel_groups(x: Tensor, r: int) -> Tensor:
    """
    Sum the ``r`` channel blocks of width C. Adjoint of :func:`repeat_channels`.

    Raises:
        PreconditionError: If r does not divide the channel extent
    """
    x = as_tensor(x)
    r = _check_positive(r)
    b, cr, h, w = x.shape
    if cr % r != 0:
        raise PreconditionError(
            f"channel extent {cr} is not divisible by r={r}"
        )
    return x.reshape(b, r, cr // r, h, w).sum(axis=1)


def tile_vector(v: NDArray[np.float64], r: int) -> NDArray[np.float64]:
    """Tile a per-channel vector ``r`` times (gamma.repeat(r) in block order)."""
    return np.tile(np.asarray(v, dtype=np.float64), _check_positive(r))


def fold_vector(v: NDArray[np.float64], r: int, reduce: str = "sum") -> NDArray[np.float64]:
    """
    Collapse a length C*r vector to length C over its ``r`` blocks.

    Args:
        v: Vector of length C*r
        r: Number of blocks
        reduce: "sum" (gradient of tiling) or "mean" (split averaging)

    Returns:
        Vector of length C
    """
    r = _check_positive(r)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] % r != 0:
        raise PreconditionError(f"vector length {v.shape[0]} is not divisible by r={r}")
    blocks = v.reshape(r, v.shape[0] // r)
    if reduce == "sum":
        return blocks.sum(axis=0)
    if reduce == "mean":
        return blocks.mean(axis=0)
    raise ValueError(f"Unknown reduction: {reduce}")


def concat_batch(a: Tensor, b: Tensor) -> Tensor:
    """
    Stack ``b``'s rows after ``a``'s rows.

    Raises:
        ShapeError: If channel or spatial extents differ
    """
    a = as_tensor(a, "a")
    b = as_tensor(b, "b")
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(
            f"concat_batch extents differ: {a.shape[1:]} vs {b.shape[1:]}"
        )
    return np.concatenate([a, b], axis=0)


def split_batch(x: Tensor, at: int) -> Tuple[Tensor, Tensor]:
    """Split rows into ``x[:at]`` and ``x[at:]`` (inverse of :func:`concat_batch`)."""
    x = as_tensor(x)
    if not 0 <= at <= x.shape[0]:
        raise PreconditionError(f"split point {at} outside batch of {x.shape[0]}")
    return x[:at].copy(), x[at:].copy()


def channel_stats(x: Tensor) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Per-channel mean and biased variance over batch and spatial axes.

    Args:
        x: Tensor of shape (B, C, H, W)

    Returns:
        Tuple (mean, var), each of length C; var divides by B*H*W

    Raises:
        EmptyReductionError: If B*H*W is zero
    """
    x = as_tensor(x)
    b, c, h, w = x.shape
    if b * h * w == 0:
        raise EmptyReductionError(
            f"channel_stats over an empty domain (shape {x.shape})"
        )
    mean = x.mean(axis=(0, 2, 3))
    centered = x - mean[None, :, None, None]
    var = (centered * centered).mean(axis=(0, 2, 3))
    return mean, var


def broadcast_channels(v: NDArray[np.float64]) -> NDArray[np.float64]:
    """View a per-channel vector as shape (1, C, 1, 1)."""
    return np.asarray(v, dtype=np.float64)[None, :, None, None]
