"""
Oracle procedures applied to a trained model with access to all task data.

``oracle_recompute_stats`` replaces every running mean/variance with exact
full-data statistics. ``oracle_retrain_affine`` additionally retrains the
normalization gamma/beta with everything else frozen.
"""
import logging
from typing import Optional

import numpy as np

from src.cil.batches import TaskBatch
from src.cil.model import TinyModel
from src.cil.trainer import fit_batches
from src.models import TrainConfig
from src.norm import BatchComposition, NormLayer
from src.tensor import ChannelMoments, Rng, Tensor, as_tensor, make_rng

logger = logging.getLogger(__name__)


def oracle_recompute_stats(model: TinyModel, data: Tensor, chunk: int = 256) -> TinyModel:
    """
    Overwrite running statistics with exact statistics of ``data``.

    Layers are processed in order; each layer's statistics are computed on
    eval-mode activations that already use the recomputed statistics of the
    layers before it.

    Args:
        model: Trained model, modified in place
        data: Inputs of every task (N, C, H, W)
        chunk: Rows per forward pass

    Returns:
        The same model
    """
    data = as_tensor(data, "data")
    if data.shape[0] == 0:
        logger.warning("recompute requested on an empty dataset; statistics unchanged")
        return model

    for index, module in enumerate(model.body):
        if not isinstance(module, NormLayer) or not module.has_running_stats:
            continue
        moments = ChannelMoments()
        for start in range(0, data.shape[0], chunk):
            h = model.features_before(data[start : start + chunk], index)
            moments.push(module.stats_input(h))
        module.set_running_stats(moments.mean, moments.var)
        logger.info(f"recomputed statistics of body.{index} over {moments.count} values")
    return model


def oracle_retrain_affine(
    model: TinyModel,
    data: Tensor,
    labels: np.ndarray,
    config: TrainConfig,
    rng: Optional[Rng] = None,
) -> TinyModel:
    """
    Retrain only normalization gamma/beta on all data.

    Normalization layers run in eval mode, so running statistics stay fixed
    and gradients flow through the eval map. All other parameters are frozen.

    Args:
        model: Model whose statistics were already recomputed
        data: Inputs of every task
        labels: Their labels
        config: Uses oracle_epochs, oracle_lr, weight_decay, and
            B_c + B_p as the batch size
        rng: Random source for the batch order

    Returns:
        The same model
    """
    data = as_tensor(data, "data")
    rng = rng if rng is not None else make_rng(config.seed)
    size = min(config.batch_current + config.batch_previous, data.shape[0])

    def batches():
        order = rng.permutation(data.shape[0])
        for start in range(0, data.shape[0] - size + 1, size):
            idx = order[start : start + size]
            yield TaskBatch(data[idx], labels[idx], BatchComposition.plain(size))

    for epoch in range(config.oracle_epochs):
        loss = fit_batches(
            model,
            batches(),
            config.oracle_lr,
            config.weight_decay,
            train=False,
            only=("gamma", "beta"),
        )
        logger.debug(f"affine retrain epoch {epoch + 1}: loss {loss:.4f}")
    logger.info(f"retrained gamma/beta for {config.oracle_epochs} epochs")
    return model
