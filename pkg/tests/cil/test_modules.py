"""
Gradient checks of the network building blocks.
"""
import numpy as np
import pytest

from src.cil.modules import Conv2d, GlobalAvgPool, Linear, softmax_cross_entropy
from src.gradcheck import check_gradients


def _check_input_gradient(module, x, rng):
    weights = rng.standard_normal(module.forward(x, train=True).shape)

    def loss(theta):
        return float(np.sum(weights * module.forward(theta.reshape(x.shape), train=True)))

    module.forward(x, train=True)
    d_x = module.backward(weights)
    return check_gradients(loss, x.ravel(), d_x.ravel())


def _check_weight_gradient(module, x, rng):
    weights = rng.standard_normal(module.forward(x, train=True).shape)
    base = module.weight.copy()

    def loss(theta):
        module.weight = theta.reshape(base.shape)
        return float(np.sum(weights * module.forward(x, train=True)))

    module.weight = base.copy()
    module.forward(x, train=True)
    module.backward(weights)
    analytic = module.grads["weight"].ravel()
    report = check_gradients(loss, base.ravel(), analytic)
    module.weight = base
    return report


def test_linear_gradients(rng):
    """Test input and weight gradients of the affine layer."""
    layer = Linear(6, 3, rng)
    x = rng.standard_normal((4, 6, 1, 1))

    assert _check_input_gradient(layer, x, rng).passed
    assert _check_weight_gradient(layer, x, rng).passed


def test_linear_bias_gradient_is_row_sum(rng):
    """Test the bias gradient sums the upstream rows."""
    layer = Linear(3, 2, rng)
    layer.forward(rng.standard_normal((5, 3, 1, 1)), train=True)
    d_y = rng.standard_normal((5, 2, 1, 1))

    layer.backward(d_y)

    np.testing.assert_allclose(layer.grads["bias"], d_y.sum(axis=(0, 2, 3)))


def test_conv_output_shape(rng):
    """Test stride-2 3x3 convolution halves the grid."""
    conv = Conv2d(2, 5, rng)

    assert conv.forward(rng.standard_normal((3, 2, 8, 8)), train=True).shape == (3, 5, 4, 4)
    assert conv.forward(rng.standard_normal((3, 2, 7, 7)), train=True).shape == (3, 5, 4, 4)


def test_conv_gradients(rng):
    """Test input and weight gradients of the convolution."""
    conv = Conv2d(2, 3, rng)
    x = rng.standard_normal((2, 2, 5, 5))

    assert _check_input_gradient(conv, x, rng).passed
    assert _check_weight_gradient(conv, x, rng).passed


def test_conv_matches_direct_sum(rng):
    """Test one output element against an explicit correlation."""
    conv = Conv2d(1, 1, rng)
    x = rng.standard_normal((1, 1, 4, 4))

    y = conv.forward(x, train=True)

    padded = np.pad(x[0, 0], 1)
    expected = np.sum(padded[2:5, 2:5] * conv.weight[0, 0]) + conv.bias[0]
    assert y[0, 0, 1, 1] == pytest.approx(expected, rel=1e-12)


def test_global_avg_pool_gradient(rng):
    """Test pooling gradients spread evenly over the grid."""
    pool = GlobalAvgPool()
    x = rng.standard_normal((2, 3, 2, 2))

    assert _check_input_gradient(pool, x, rng).passed


def test_softmax_cross_entropy_gradient(rng):
    """Test the logit gradient against finite differences."""
    logits = rng.standard_normal((5, 4))
    labels = np.array([0, 3, 1, 1, 2])

    _, d_logits = softmax_cross_entropy(logits, labels)
    report = check_gradients(
        lambda p: softmax_cross_entropy(p.reshape(5, 4), labels)[0],
        logits.ravel(),
        d_logits.ravel(),
    )

    assert report.passed


def test_softmax_cross_entropy_uniform_logits():
    """Test equal logits give log K."""
    loss, _ = softmax_cross_entropy(np.zeros((3, 4)), np.array([0, 1, 2]))

    assert loss == pytest.approx(np.log(4.0))


def test_linear_grow_appends_zero_rows(rng):
    """Test growth keeps old rows and adds zeros."""
    layer = Linear(3, 2, rng)
    old = layer.weight.copy()

    layer.grow(2)

    assert layer.out_features == 4
    np.testing.assert_array_equal(layer.weight[:2], old)
    assert not layer.weight[2:].any() and not layer.bias[2:].any()
