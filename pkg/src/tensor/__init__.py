"""
Dense NCHW tensor substrate: layout operations, reductions and seeded RNG.
"""
from src.tensor.exceptions import (
    TensorError,
    ShapeError,
    PreconditionError,
    EmptyReductionError,
)
from src.tensor.ops import (
    Tensor,
    as_tensor,
    reshape_split,
    reshape_merge,
    repeat_channels,
    average_channel_groups,
    sum_channel_groups,
    tile_vector,
    fold_vector,
    concat_batch,
    split_batch,
    channel_stats,
    broadcast_channels,
)
from src.tensor.moments import ChannelMoments
from src.tensor.rng import Rng, make_rng, spawn

__all__ = [
    "TensorError",
    "ShapeError",
    "PreconditionError",
    "EmptyReductionError",
    "Tensor",
    "as_tensor",
    "reshape_split",
    "reshape_merge",
    "repeat_channels",
    "average_channel_groups",
    "sum_channel_groups",
    "tile_vector",
    "fold_vector",
    "concat_batch",
    "split_batch",
    "channel_stats",
    "broadcast_channels",
    "ChannelMoments",
    "Rng",
    "make_rng",
    "spawn",
]
