"""
Normalization layers with hand-derived gradients: BN, GN, CN and TBBN.
"""
from src.norm.exceptions import (
    NormLayerError,
    CacheReuseError,
    SplitFactorError,
    DegenerateBatchError,
)
from src.norm.state import NormLayerState, BatchComposition, BackwardCache, make_state
from src.norm.split import common_divisors, compute_r, feasible_r, split_factor
from src.norm.batchnorm import (
    bn_forward_train,
    bn_forward_eval,
    bn_backward,
    bn_eval_backward,
)
from src.norm.groupnorm import (
    gn_forward_train,
    gn_forward_eval,
    gn_backward,
    cn_forward_train,
    cn_forward_eval,
    cn_backward,
)
from src.norm.tbbn import (
    tbbn_forward_train,
    tbbn_forward_eval,
    tbbn_backward,
    balanced_batch_stats,
)
from src.norm.bias import expected_bn_mean, expected_bn_mean_bias
from src.norm.layers import (
    NormLayer,
    BatchNorm,
    GroupNorm,
    ContinualNorm,
    TaskBalancedBatchNorm,
    make_norm_layer,
)

__all__ = [
    "NormLayerError",
    "CacheReuseError",
    "SplitFactorError",
    "DegenerateBatchError",
    "NormLayerState",
    "BatchComposition",
    "BackwardCache",
    "make_state",
    "common_divisors",
    "compute_r",
    "feasible_r",
    "split_factor",
    "bn_forward_train",
    "bn_forward_eval",
    "bn_backward",
    "bn_eval_backward",
    "gn_forward_train",
    "gn_forward_eval",
    "gn_backward",
    "cn_forward_train",
    "cn_forward_eval",
    "cn_backward",
    "tbbn_forward_train",
    "tbbn_forward_eval",
    "tbbn_backward",
    "balanced_batch_stats",
    "expected_bn_mean",
    "expected_bn_mean_bias",
    "NormLayer",
    "BatchNorm",
    "GroupNorm",
    "ContinualNorm",
    "TaskBalancedBatchNorm",
    "make_norm_layer",
]
