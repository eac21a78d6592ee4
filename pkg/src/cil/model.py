"""
TinyModel: a small network with pluggable normalization and a growable head.
"""
import logging
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.cil.exceptions import HarnessError
from src.cil.modules import Conv2d, GlobalAvgPool, Linear, ReLU
from src.models import AblationFlags, NormKind, TrainConfig
from src.norm import BatchComposition, NormLayer, make_norm_layer
from src.tensor import Tensor, as_tensor, make_rng

logger = logging.getLogger(__name__)


class TinyModel:
    """
    Two (affine or conv) + norm + ReLU blocks followed by a linear head.

    The "mlp" variant works on (N, D, 1, 1) feature rows. The "conv" variant
    takes (N, C, H, W) images, applies two stride-2 3x3 convolutions and
    pools globally before the head.
    """

    def __init__(
        self,
        in_shape: Sequence[int],
        num_classes: int,
        norm: NormKind = "bn",
        hidden: int = 32,
        groups: int = 4,
        ablation: Optional[AblationFlags] = None,
        bessel: bool = False,
        arch: Literal["mlp", "conv"] = "mlp",
        seed: int = 0,
    ):
        """
        Build the network.

        Args:
            in_shape: Per-sample input shape (C, H, W)
            num_classes: Initial head width
            norm: Normalization kind used in every block
            hidden: Width (mlp) or channel count (conv) of both blocks
            groups: GN/CN group count
            ablation: TBBN flags
            bessel: Bessel factor on running variance updates
            arch: "mlp" or "conv"
            seed: Seed for the weight initialization

        Raises:
            HarnessError: For an unknown architecture
        """
        if arch not in ("mlp", "conv"):
            raise HarnessError(f"Unknown architecture: {arch}")
        self.in_shape = tuple(int(v) for v in in_shape)
        self.norm = norm
        self.hidden = hidden
        self.groups = groups
        self.ablation = ablation if ablation is not None else AblationFlags()
        self.bessel = bessel
        self.arch = arch

        rng = make_rng(seed)
        norm_args = dict(groups=groups, bessel=bessel, ablation=self.ablation)
        if arch == "mlp":
            features = int(np.prod(self.in_shape))
            self.body = [
                Linear(features, hidden, rng),
                make_norm_layer(norm, hidden, **norm_args),
                ReLU(),
                Linear(hidden, hidden, rng),
                make_norm_layer(norm, hidden, **norm_args),
                ReLU(),
            ]
        else:
            self.body = [
                Conv2d(self.in_shape[0], hidden, rng),
                make_norm_layer(norm, hidden, **norm_args),
                ReLU(),
                Conv2d(hidden, hidden, rng),
                make_norm_layer(norm, hidden, **norm_args),
                ReLU(),
                GlobalAvgPool(),
            ]
        self.head = Linear(hidden, num_classes, rng, std=np.sqrt(1.0 / hidden))

    @classmethod
    def from_config(
        cls, config: TrainConfig, in_shape: Sequence[int], num_classes: int, seed: int
    ) -> "TinyModel":
        """Build a model from a TrainConfig."""
        return cls(
            in_shape,
            num_classes,
            norm=config.norm,
            hidden=config.hidden,
            groups=config.groups,
            ablation=config.ablation,
            bessel=config.bessel,
            arch=config.arch,
            seed=seed,
        )

    @property
    def num_classes(self) -> int:
        return self.head.out_features

    @property
    def norm_layers(self) -> List[NormLayer]:
        return [m for m in self.body if isinstance(m, NormLayer)]

    def modules(self) -> Iterator[Tuple[str, object]]:
        for i, module in enumerate(self.body):
            yield f"body.{i}", module
        yield "head", self.head

    def grow_head(self, num_classes: int) -> None:
        """Widen the head to ``num_classes`` outputs; old rows are untouched."""
        extra = num_classes - self.num_classes
        if extra < 0:
            raise HarnessError(
                f"cannot shrink head from {self.num_classes} to {num_classes} classes"
            )
        if extra:
            self.head.grow(extra)
            logger.info(f"head grown to {num_classes} classes")

    def forward(
        self,
        x: Tensor,
        train: bool,
        composition: Optional[BatchComposition] = None,
        keep_graph: bool = False,
    ) -> np.ndarray:
        """
        Logits (N, K) for a batch.

        Args:
            x: Input batch
            train: Train-mode normalization (batch statistics)
            composition: Batch layout passed to every normalization layer
            keep_graph: Allow a backward pass after an eval-mode forward
        """
        h = as_tensor(x)
        for module in self.body:
            h = module.forward(h, train, composition, keep_graph)
        logits = self.head.forward(h, train, composition, keep_graph)
        return logits.reshape(logits.shape[0], -1)

    def features_before(self, x: Tensor, index: int) -> Tensor:
        """Eval-mode activations entering ``self.body[index]``."""
        h = as_tensor(x)
        for module in self.body[:index]:
            h = module.forward(h, train=False)
        return h

    def backward(self, d_logits: np.ndarray) -> None:
        """Back-propagate a logit gradient; parameter gradients land in each module."""
        d = self.head.backward(np.asarray(d_logits)[:, :, None, None])
        for module in reversed(self.body):
            d = module.backward(d)

    def named_parameters(self) -> Iterator[Tuple[str, object, str]]:
        """(qualified name, module, key) for every trainable array."""
        for prefix, module in self.modules():
            for key in module.params():
                yield f"{prefix}.{key}", module, key

    def predict(self, x: Tensor, chunk: int = 512) -> np.ndarray:
        """Eval-mode class predictions."""
        x = as_tensor(x)
        preds = [
            self.forward(x[i : i + chunk], train=False).argmax(axis=1)
            for i in range(0, x.shape[0], chunk)
        ]
        return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter and running statistic, keyed by name."""
        state = {name: module.params()[key].copy() for name, module, key in self.named_parameters()}
        for prefix, module in self.modules():
            if isinstance(module, NormLayer) and module.has_running_stats:
                state[f"{prefix}.running_mean"] = module.state.running_mean.copy()
                state[f"{prefix}.running_var"] = module.state.running_var.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Restore arrays produced by :meth:`state_dict`.

        Raises:
            HarnessError: If a name is missing or a shape differs
        """
        modules = dict(self.modules())
        head_rows = state.get("head.bias")
        if head_rows is not None:
            self.grow_head(int(np.asarray(head_rows).shape[0]))
        for name, value in state.items():
            prefix, key = name.rsplit(".", 1)
            module = modules.get(prefix)
            if module is None:
                raise HarnessError(f"unknown module in state: {prefix}")
            value = np.asarray(value, dtype=np.float64)
            if isinstance(module, NormLayer):
                target = getattr(module.state, key)
            else:
                target = getattr(module, key)
            if target.shape != value.shape:
                raise HarnessError(
                    f"shape mismatch for {name}: {target.shape} vs {value.shape}"
                )
            target[...] = value


def sgd_step(
    model: TinyModel,
    lr: float,
    weight_decay: float = 0.0,
    only: Optional[Sequence[str]] = None,
) -> None:
    """
    Plain SGD with L2 weight decay, in place.

    Args:
        model: Model whose modules hold fresh gradients
        lr: Learning rate
        weight_decay: L2 coefficient added to every gradient
        only: If given, parameter keys (e.g. ("gamma", "beta")) to update
    """
    for _, module, key in model.named_parameters():
        if only is not None and key not in only:
            continue
        param = module.params()[key]
        param -= lr * (module.grads[key] + weight_decay * param)
