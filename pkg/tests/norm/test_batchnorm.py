"""
Tests for batch norm, group norm and continual norm passes.
"""
import numpy as np
import pytest

from src.norm import (
    BatchComposition,
    CacheReuseError,
    DegenerateBatchError,
    NormLayerError,
    bn_backward,
    bn_forward_eval,
    bn_forward_train,
    cn_backward,
    cn_forward_eval,
    cn_forward_train,
    gn_backward,
    gn_forward_eval,
    gn_forward_train,
    make_state,
)
from src.tensor import channel_stats


def test_make_state_defaults():
    """Test initial parameters and running statistics."""
    state = make_state(3)

    assert state.gamma.tolist() == [1.0, 1.0, 1.0]
    assert state.beta.tolist() == [0.0, 0.0, 0.0]
    assert state.running_mean.tolist() == [0.0, 0.0, 0.0]
    assert state.running_var.tolist() == [1.0, 1.0, 1.0]
    assert state.epsilon == 1e-5
    assert state.momentum_new == 0.1


def test_make_state_rejects_bad_groups():
    """Test G must divide C."""
    with pytest.raises(NormLayerError):
        make_state(6, groups=4)


def test_batch_composition_validation():
    """Test B_c >= 1, B_p >= 0, t >= 1."""
    with pytest.raises(NormLayerError):
        BatchComposition(0, 4, 2)
    with pytest.raises(NormLayerError):
        BatchComposition(4, -1, 2)
    with pytest.raises(NormLayerError):
        BatchComposition(4, 4, 0)
    assert BatchComposition(8, 4, 3).size == 12


def test_update_running_plain():
    """Test the EMA with momentum 0.1 on the new statistic."""
    state = make_state(1)

    state.update_running(np.array([2.0]), np.array([3.0]), 10)

    assert state.running_mean[0] == pytest.approx(0.2)
    assert state.running_var[0] == pytest.approx(0.9 + 0.3)


def test_update_running_bessel():
    """Test the (V-1)/V factor on the old running variance."""
    state = make_state(1, bessel=True)

    state.update_running(np.array([0.0]), np.array([3.0]), 10)

    assert state.running_var[0] == pytest.approx(0.9 * 0.9 + 0.3)


def test_running_var_stays_nonnegative(rng):
    """Test a sequence of updates never drives the variance negative."""
    state = make_state(4, bessel=True)

    for _ in range(50):
        state.update_running(rng.standard_normal(4), np.abs(rng.standard_normal(4)) * 1e-12, 2)

    assert np.all(state.running_var >= 0.0)


def test_bn_constant_input():
    """Test constant channels normalize to zero."""
    state = make_state(2)

    y, _ = bn_forward_train(np.full((4, 2, 2, 2), 7.0), state)

    assert np.all(np.abs(y) <= 1e-6)


def test_bn_affine_identity(rng):
    """Test gamma=2, beta=3 on standardized input gives about 2x+3."""
    x = rng.standard_normal((64, 1, 4, 4))
    mean, var = channel_stats(x)
    x = (x - mean[0]) / np.sqrt(var[0])
    state = make_state(1)
    state.gamma[:] = 2.0
    state.beta[:] = 3.0

    y, _ = bn_forward_train(x, state)

    np.testing.assert_allclose(y, 2.0 * x + 3.0, atol=1e-4)


def test_bn_scalar_example():
    """Test values {1,2,3,4} against the scalar formula."""
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1, 1)
    state = make_state(1)

    y, _ = bn_forward_train(x, state)

    expected = (x - 2.5) / np.sqrt(1.25 + 1e-5)
    np.testing.assert_allclose(y, expected, rtol=1e-12)
    assert state.running_mean[0] == pytest.approx(0.25)
    assert state.running_var[0] == pytest.approx(0.9 + 0.125)


def test_bn_degenerate_batch():
    """Test a single element per channel is rejected."""
    with pytest.raises(DegenerateBatchError):
        bn_forward_train(np.zeros((1, 2, 1, 1)), make_state(2))


def test_bn_eval_with_default_stats(rng):
    """Test running stats (0, 1) give x / sqrt(1 + eps) and leave the state alone."""
    x = rng.standard_normal((3, 2, 2, 2))
    state = make_state(2)

    y = bn_forward_eval(x, state)

    np.testing.assert_allclose(y, x / np.sqrt(1 + 1e-5), rtol=1e-14)
    assert state.running_mean.tolist() == [0.0, 0.0]


def test_bn_eval_at_running_mean_returns_beta():
    """Test x = running_mean gives beta."""
    state = make_state(2)
    state.running_mean[:] = [1.5, -2.0]
    state.beta[:] = [0.25, 4.0]
    x = np.broadcast_to(state.running_mean[None, :, None, None], (2, 2, 1, 1))

    y = bn_forward_eval(x, state)

    np.testing.assert_array_equal(y[:, 0], 0.25)
    np.testing.assert_array_equal(y[:, 1], 4.0)


def test_bn_eval_matches_train_with_batch_stats(rng):
    """Test eval equals train when running stats are set to the batch stats."""
    x = rng.standard_normal((6, 3, 2, 2))
    train_state = make_state(3)
    eval_state = make_state(3)
    mean, var = channel_stats(x)
    eval_state.running_mean = mean
    eval_state.running_var = var

    y_train, _ = bn_forward_train(x, train_state)
    y_eval = bn_forward_eval(x, eval_state)

    np.testing.assert_allclose(y_train, y_eval, rtol=1e-12, atol=1e-14)


def test_bn_backward_zero_upstream(rng):
    """Test zero upstream gradient gives zero gradients."""
    state = make_state(2)
    _, cache = bn_forward_train(rng.standard_normal((4, 2, 2, 2)), state)

    d_x, d_gamma, d_beta = bn_backward(np.zeros((4, 2, 2, 2)), cache, state)

    assert not d_x.any() and not d_gamma.any() and not d_beta.any()


def test_bn_backward_beta_is_channel_sum(rng):
    """Test d_beta is the per-channel sum of the upstream gradient."""
    state = make_state(3)
    _, cache = bn_forward_train(rng.standard_normal((5, 3, 2, 2)), state)
    d_y = rng.standard_normal((5, 3, 2, 2))

    _, _, d_beta = bn_backward(d_y, cache, state)

    np.testing.assert_allclose(d_beta, d_y.sum(axis=(0, 2, 3)))


def test_backward_cache_consumed_once(rng):
    """Test the second backward on one cache raises."""
    state = make_state(2)
    _, cache = bn_forward_train(rng.standard_normal((4, 2, 1, 1)), state)
    bn_backward(np.ones((4, 2, 1, 1)), cache, state)

    assert cache.consumed
    with pytest.raises(CacheReuseError):
        bn_backward(np.ones((4, 2, 1, 1)), cache, state)


def test_backward_cache_kind_mismatch(rng):
    """Test a BN cache cannot feed the GN backward."""
    state = make_state(2)
    _, cache = bn_forward_train(rng.standard_normal((4, 2, 1, 1)), state)

    with pytest.raises(CacheReuseError):
        gn_backward(np.ones((4, 2, 1, 1)), cache)


def test_gn_standardizes_each_group(rng):
    """Test per-(sample, group) mean 0 and variance close to 1."""
    x = rng.standard_normal((3, 6, 2, 2)) * 4.0 + 1.0

    y, _ = gn_forward_train(x, groups=2)

    flat = y.reshape(3, 2, -1)
    np.testing.assert_allclose(flat.mean(axis=2), 0.0, atol=1e-10)
    np.testing.assert_allclose(flat.var(axis=2), 1.0, atol=1e-5)


def test_gn_with_group_per_channel_is_instance_norm(rng):
    """Test G = C standardizes every (sample, channel) slice."""
    x = rng.standard_normal((2, 3, 3, 3))

    y = gn_forward_eval(x, groups=3)

    mean = x.mean(axis=(2, 3), keepdims=True)
    var = x.var(axis=(2, 3), keepdims=True)
    np.testing.assert_allclose(y, (x - mean) / np.sqrt(var + 1e-5), rtol=1e-10, atol=1e-12)


def test_gn_rejects_non_dividing_groups():
    """Test G must divide C."""
    with pytest.raises(NormLayerError):
        gn_forward_train(np.zeros((2, 6, 1, 1)), groups=4)


def test_cn_equals_bn_of_grouped_batch(rng):
    """Test CN with G=1 on a repeated sample equals BN of the GN'd batch."""
    sample = rng.standard_normal((1, 4, 3, 3))
    x = np.repeat(sample, 5, axis=0)
    cn_state = make_state(4, groups=1)
    bn_state = make_state(4)

    y_cn, _ = cn_forward_train(x, cn_state)
    y_bn, _ = bn_forward_train(gn_forward_eval(x, 1), bn_state)

    np.testing.assert_array_equal(y_cn, y_bn)
    np.testing.assert_array_equal(cn_state.running_var, bn_state.running_var)


def test_cn_eval_is_deterministic(rng):
    """Test two eval passes agree exactly."""
    x = rng.standard_normal((3, 4, 2, 2))
    state = make_state(4, groups=2)

    np.testing.assert_array_equal(cn_forward_eval(x, state), cn_forward_eval(x, state))


def test_cn_backward_shapes(rng):
    """Test CN gradient shapes."""
    state = make_state(4, groups=2)
    _, cache = cn_forward_train(rng.standard_normal((3, 4, 2, 2)), state)

    d_x, d_gamma, d_beta = cn_backward(rng.standard_normal((3, 4, 2, 2)), cache, state)

    assert d_x.shape == (3, 4, 2, 2)
    assert d_gamma.shape == d_beta.shape == (4,)
