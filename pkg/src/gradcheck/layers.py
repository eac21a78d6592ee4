"""
Gradient checks for the normalization layers.

Each check builds a random input, random gamma/beta and a random linear loss
L = sum(W * y), then compares the layer's analytic dL/dx, dL/dgamma and
dL/dbeta against central finite differences of the train-mode forward map.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from src.gradcheck.exceptions import GradCheckError
from src.gradcheck.oracle import DEFAULT_STEP, DEFAULT_THRESHOLD, check_gradients
from src.models import AblationFlags, GradReport, NormKind
from src.norm import BatchComposition, NormLayerError, make_norm_layer
from src.tensor import TensorError, make_rng

logger = logging.getLogger(__name__)


def _default_groups(channels: int) -> int:
    return 2 if channels % 2 == 0 and channels > 1 else 1


def _composition(
    kind: NormKind, batch: int, task: int, bc: Optional[int], bp: int
) -> BatchComposition:
    if kind != "tbbn" or task == 1:
        return BatchComposition.plain(batch)
    bc = batch - bp if bc is None else bc
    if bc + bp != batch:
        raise GradCheckError(f"B_c={bc} + B_p={bp} does not match batch size {batch}")
    return BatchComposition(batch_current=bc, batch_previous=bp, task=task)


def check_layer(
    kind: NormKind,
    shape: Tuple[int, int, int, int],
    t: int = 1,
    bc: Optional[int] = None,
    bp: int = 0,
    seed: int = 0,
    groups: Optional[int] = None,
    ablation: Optional[AblationFlags] = None,
    step: float = DEFAULT_STEP,
    threshold: float = DEFAULT_THRESHOLD,
) -> GradReport:
    """
    Finite-difference check of one normalization layer's train-mode gradients.

    Args:
        kind: Layer kind, one of bn, gn, cn, tbbn
        shape: Input shape (N, C, H, W)
        t: Task index (TBBN only)
        bc: Current-task rows (TBBN only), defaults to N - bp
        bp: Exemplar rows (TBBN only)
        seed: Seed for the input, parameters and loss weights
        groups: GN/CN group count, defaults to 2 when C is even
        ablation: TBBN flags, full TBBN when omitted
        step: Finite-difference step
        threshold: Pass threshold on the relative error

    Returns:
        GradReport with blocks "x", "gamma" and "beta"

    Raises:
        GradCheckError: For an inconsistent composition or layer setup
    """
    if len(shape) != 4:
        raise GradCheckError(f"shape must have four extents, got {shape}")
    n, c, h, w = (int(v) for v in shape)
    groups = groups if groups is not None else _default_groups(c)
    try:
        layer = make_norm_layer(kind, c, groups=groups, ablation=ablation)
        comp = _composition(kind, n, t, bc, bp)
    except NormLayerError as e:
        raise GradCheckError(f"cannot build {kind} check problem: {e}") from e

    rng = make_rng(seed)
    x = rng.standard_normal((n, c, h, w))
    weights = rng.standard_normal((n, c, h, w))
    base = layer.state.copy()
    base.gamma = 1.0 + 0.5 * rng.standard_normal(c)
    base.beta = rng.standard_normal(c)

    size = x.size
    blocks = {
        "x": slice(0, size),
        "gamma": slice(size, size + c),
        "beta": slice(size + c, size + 2 * c),
    }
    params = np.concatenate([x.ravel(), base.gamma, base.beta])

    def run(theta: np.ndarray) -> np.ndarray:
        # every perturbed evaluation starts from the same running statistics
        layer.state = base.copy()
        layer.state.gamma = theta[blocks["gamma"]].copy()
        layer.state.beta = theta[blocks["beta"]].copy()
        x_perturbed = theta[blocks["x"]].reshape(n, c, h, w)
        return layer.forward(x_perturbed, train=True, composition=comp)

    def loss(theta: np.ndarray) -> float:
        return float(np.sum(weights * run(theta)))

    try:
        run(params)
    except (NormLayerError, TensorError) as e:
        raise GradCheckError(f"{kind} forward rejected the problem: {e}") from e
    d_x = layer.backward(weights)
    analytic = np.concatenate(
        [d_x.ravel(), layer.grads["gamma"], layer.grads["beta"]]
    )

    logger.info(f"gradient check: {kind} shape={tuple(shape)} t={t} seed={seed}")
    return check_gradients(loss, params, analytic, step, threshold, blocks)
