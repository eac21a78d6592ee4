"""
Affine, convolution and activation modules with hand-written gradients.

Every module follows the normalization layers' calling convention:
``forward(x, train, composition=None, keep_graph=False)`` then
``backward(d_y)``, with parameter gradients left in ``self.grads``.
"""
from typing import Dict, Optional

import numpy as np

from src.norm import BatchComposition
from src.tensor import Rng, Tensor, as_tensor


class Linear:
    """Fully connected layer on (N, C, H, W) inputs flattened per row."""

    def __init__(self, in_features: int, out_features: int, rng: Rng, std: Optional[float] = None):
        std = np.sqrt(2.0 / in_features) if std is None else std
        self.weight = rng.normal(0.0, std, size=(out_features, in_features))
        self.bias = np.zeros(out_features)
        self.grads: Dict[str, np.ndarray] = {}
        self._input: Optional[np.ndarray] = None
        self._in_shape = None

    @property
    def out_features(self) -> int:
        return int(self.weight.shape[0])

    def params(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def forward(
        self,
        x: Tensor,
        train: bool,
        composition: Optional[BatchComposition] = None,
        keep_graph: bool = False,
    ) -> Tensor:
        x = as_tensor(x)
        self._in_shape = x.shape
        self._input = x.reshape(x.shape[0], -1)
        y = self._input @ self.weight.T + self.bias
        return y[:, :, None, None]

    def backward(self, d_y: Tensor) -> Tensor:
        d = as_tensor(d_y, "d_y").reshape(d_y.shape[0], -1)
        self.grads = {"weight": d.T @ self._input, "bias": d.sum(axis=0)}
        return (d @ self.weight).reshape(self._in_shape)

    def grow(self, extra: int) -> None:
        """Append ``extra`` zero-initialized output rows."""
        self.weight = np.concatenate([self.weight, np.zeros((extra, self.weight.shape[1]))])
        self.bias = np.concatenate([self.bias, np.zeros(extra)])


class Conv2d:
    """
    Square-kernel 2-D convolution computed as a patch matrix product.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: Rng,
        kernel: int = 3,
        stride: int = 2,
        padding: int = 1,
    ):
        fan_in = in_channels * kernel * kernel
        self.weight = rng.normal(
            0.0, np.sqrt(2.0 / fan_in), size=(out_channels, in_channels, kernel, kernel)
        )
        self.bias = np.zeros(out_channels)
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.grads: Dict[str, np.ndarray] = {}
        self._cols: Optional[np.ndarray] = None
        self._in_shape = None

    def params(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def _out_size(self, size: int) -> int:
        return (size + 2 * self.padding - self.kernel) // self.stride + 1

    def forward(
        self,
        x: Tensor,
        train: bool,
        composition: Optional[BatchComposition] = None,
        keep_graph: bool = False,
    ) -> Tensor:
        x = as_tensor(x)
        n, c, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.padding
        ho, wo = self._out_size(h), self._out_size(w)
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = np.empty((n, ho, wo, c, k, k))
        for i in range(k):
            for j in range(k):
                window = padded[:, :, i : i + s * ho : s, j : j + s * wo : s]
                cols[:, :, :, :, i, j] = window.transpose(0, 2, 3, 1)
        self._in_shape = x.shape
        self._cols = cols.reshape(n * ho * wo, c * k * k)
        out = self._cols @ self.weight.reshape(self.weight.shape[0], -1).T + self.bias
        return out.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2).copy()

    def backward(self, d_y: Tensor) -> Tensor:
        d_y = as_tensor(d_y, "d_y")
        n, c, h, w = self._in_shape
        k, s, p = self.kernel, self.stride, self.padding
        out_channels, ho, wo = d_y.shape[1], d_y.shape[2], d_y.shape[3]
        d = d_y.transpose(0, 2, 3, 1).reshape(-1, out_channels)
        flat_weight = self.weight.reshape(out_channels, -1)
        self.grads = {
            "weight": (d.T @ self._cols).reshape(self.weight.shape),
            "bias": d.sum(axis=0),
        }
        d_cols = (d @ flat_weight).reshape(n, ho, wo, c, k, k)
        d_padded = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for i in range(k):
            for j in range(k):
                d_padded[:, :, i : i + s * ho : s, j : j + s * wo : s] += d_cols[
                    :, :, :, :, i, j
                ].transpose(0, 3, 1, 2)
        return d_padded[:, :, p : p + h, p : p + w].copy()


class ReLU:
    """Rectifier."""

    def __init__(self):
        self.grads: Dict[str, np.ndarray] = {}
        self._mask: Optional[np.ndarray] = None

    def params(self) -> Dict[str, np.ndarray]:
        return {}

    def forward(self, x, train, composition=None, keep_graph=False):
        x = as_tensor(x)
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, d_y):
        return np.where(self._mask, as_tensor(d_y, "d_y"), 0.0)


class GlobalAvgPool:
    """Average over the spatial axes, keeping a (N, C, 1, 1) shape."""

    def __init__(self):
        self.grads: Dict[str, np.ndarray] = {}
        self._shape = None

    def params(self) -> Dict[str, np.ndarray]:
        return {}

    def forward(self, x, train, composition=None, keep_graph=False):
        x = as_tensor(x)
        self._shape = x.shape
        return x.mean(axis=(2, 3), keepdims=True)

    def backward(self, d_y):
        n, c, h, w = self._shape
        return np.broadcast_to(as_tensor(d_y, "d_y") / (h * w), self._shape).copy()


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """
    Mean cross-entropy over the batch and its gradient.

    Args:
        logits: (N, K) scores
        labels: (N,) integer targets in [0, K)

    Returns:
        Tuple (loss, d_logits)
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()
    d_logits = np.exp(log_probs)
    d_logits[np.arange(n), labels] -= 1.0
    return float(loss), d_logits / n
