"""
Tests for task-balanced batch normalization.
"""
import logging

import numpy as np
import pytest

from src.models import AblationFlags
from src.norm import (
    BatchComposition,
    NormLayerError,
    balanced_batch_stats,
    bn_backward,
    bn_forward_eval,
    bn_forward_train,
    make_state,
    tbbn_backward,
    tbbn_forward_eval,
    tbbn_forward_train,
)
from src.norm.tbbn import balance, resolve_split, unbalance
from src.tensor import channel_stats


def _random_state(channels, rng, ablation=None):
    state = make_state(channels, ablation=ablation)
    state.gamma = 1.0 + 0.5 * rng.standard_normal(channels)
    state.beta = rng.standard_normal(channels)
    return state


def test_balance_shape():
    """Test the balanced batch is (B_c/r + B_p, C*r, H, W)."""
    x = np.zeros((12, 4, 2, 2))

    balanced = balance(x, batch_current=8, r=4)

    assert balanced.shape == (2 + 4, 16, 2, 2)


def test_unbalance_inverts_balance(rng):
    """Test un-balancing a balanced batch returns the original rows."""
    x = rng.standard_normal((12, 3, 2, 2))

    restored = unbalance(balance(x, 8, 2), rows_current=4, r=2)

    np.testing.assert_array_equal(restored, x)


def test_first_task_matches_bn_bit_exact(rng):
    """Test t=1 forward, running stats and backward equal plain BN exactly."""
    x = rng.standard_normal((8, 4, 2, 2))
    d_y = rng.standard_normal((8, 4, 2, 2))
    bn_state = _random_state(4, np.random.default_rng(5))
    tb_state = bn_state.copy()

    y_bn, bn_cache = bn_forward_train(x, bn_state)
    y_tb, tb_cache = tbbn_forward_train(x, BatchComposition.plain(8), tb_state)
    grads_bn = bn_backward(d_y, bn_cache, bn_state)
    grads_tb = tbbn_backward(d_y, tb_cache, tb_state)

    np.testing.assert_array_equal(y_tb, y_bn)
    np.testing.assert_array_equal(tb_state.running_mean, bn_state.running_mean)
    np.testing.assert_array_equal(tb_state.running_var, bn_state.running_var)
    for tb, bn in zip(grads_tb, grads_bn):
        np.testing.assert_array_equal(tb, bn)


def test_vanilla_flags_match_bn(rng):
    """Test all-false flags at t=3 reproduce BN within 1e-12."""
    x = rng.standard_normal((12, 4, 2, 2))
    d_y = rng.standard_normal((12, 4, 2, 2))
    bn_state = _random_state(4, np.random.default_rng(9), AblationFlags.vanilla())
    tb_state = bn_state.copy()
    comp = BatchComposition(8, 4, 3)

    y_bn, bn_cache = bn_forward_train(x, bn_state)
    y_tb, tb_cache = tbbn_forward_train(x, comp, tb_state)
    grads_bn = bn_backward(d_y, bn_cache, bn_state)
    grads_tb = tbbn_backward(d_y, tb_cache, tb_state)

    np.testing.assert_allclose(y_tb, y_bn, rtol=0, atol=1e-12)
    np.testing.assert_allclose(tb_state.running_mean, bn_state.running_mean, atol=1e-12)
    np.testing.assert_allclose(tb_state.running_var, bn_state.running_var, atol=1e-12)
    for tb, bn in zip(grads_tb, grads_bn):
        np.testing.assert_allclose(tb, bn, rtol=0, atol=1e-12)


def test_empty_memory_falls_back_to_bn(rng, caplog):
    """Test t >= 2 with no exemplar rows behaves as BN and warns."""
    x = rng.standard_normal((8, 2, 1, 1))
    bn_state = make_state(2)
    tb_state = make_state(2)

    with caplog.at_level(logging.WARNING):
        y_tb, _ = tbbn_forward_train(x, BatchComposition(8, 0, 3), tb_state)
    y_bn, _ = bn_forward_train(x, bn_state)

    np.testing.assert_array_equal(y_tb, y_bn)
    assert "no exemplar rows" in caplog.text


def test_resolve_split_uses_feasible_factor():
    """Test r* = 2 for (48, 16, t=2)."""
    assert resolve_split(BatchComposition(48, 16, 2)) == 2


def test_batch_size_must_match_composition(rng):
    """Test a batch whose length disagrees with B_c + B_p is rejected."""
    with pytest.raises(NormLayerError):
        tbbn_forward_train(rng.standard_normal((10, 2, 1, 1)), BatchComposition(8, 4, 3), make_state(2))


def test_eval_is_bn_eval(rng):
    """Test eval output is bit-identical to BN eval."""
    state = _random_state(3, rng)
    state.running_mean = rng.standard_normal(3)
    state.running_var = np.abs(rng.standard_normal(3)) + 0.1
    x = rng.standard_normal((5, 3, 2, 2))

    np.testing.assert_array_equal(tbbn_forward_eval(x, state), bn_forward_eval(x, state))


def test_eval_at_running_mean_returns_beta():
    """Test x = running_mean gives beta."""
    state = make_state(1)
    state.running_mean[:] = 0.75
    state.beta[:] = -1.5

    y = tbbn_forward_eval(np.full((2, 1, 2, 2), 0.75), state)

    np.testing.assert_array_equal(y, -1.5)


def test_backward_zero_upstream(rng):
    """Test zero upstream gradient gives zero gradients."""
    state = _random_state(4, rng)
    _, cache = tbbn_forward_train(rng.standard_normal((12, 4, 2, 2)), BatchComposition(8, 4, 3), state)

    d_x, d_gamma, d_beta = tbbn_backward(np.zeros((12, 4, 2, 2)), cache, state)

    assert not d_x.any() and not d_gamma.any() and not d_beta.any()


@pytest.mark.parametrize("flags", [AblationFlags(), AblationFlags.vanilla(), AblationFlags.case(1), AblationFlags.case(3)])
def test_each_row_contributes_equally_to_beta(rng, flags):
    """Test an indicator gradient on any single row adds H*W to every d_beta entry."""
    x = rng.standard_normal((12, 3, 2, 2))
    comp = BatchComposition(8, 4, 3)

    for row in range(12):
        state = _random_state(3, np.random.default_rng(row), flags)
        _, cache = tbbn_forward_train(x, comp, state)
        d_y = np.zeros_like(x)
        d_y[row] = 1.0

        _, _, d_beta = tbbn_backward(d_y, cache, state)

        np.testing.assert_allclose(d_beta, 4.0, rtol=1e-12)


def test_balanced_running_stats_use_split_average(rng):
    """Test running mean after one step is 0.1 times the split-averaged mean."""
    x = rng.standard_normal((12, 2, 1, 1))
    comp = BatchComposition(8, 4, 3)
    state = make_state(2)

    tbbn_forward_train(x, comp, state)
    mean, _ = balanced_batch_stats(x, comp)

    np.testing.assert_allclose(state.running_mean, 0.1 * mean, rtol=1e-12)


def test_unbalanced_test_stats_use_plain_batch(rng):
    """Test case 2 feeds plain batch statistics into the running estimates."""
    x = rng.standard_normal((12, 2, 1, 1))
    state = make_state(2, ablation=AblationFlags.case(2))

    tbbn_forward_train(x, BatchComposition(8, 4, 3), state)
    mean, _ = channel_stats(x)

    np.testing.assert_allclose(state.running_mean, 0.1 * mean, rtol=1e-12)


def test_split_averaged_mean_is_task_uniform():
    """Test Monte Carlo expectations of the balanced and plain batch means."""
    rng = np.random.default_rng(2024)
    task_means = np.array([1.0, 2.0, 3.0, 4.0])
    comp = BatchComposition(48, 24, 4)
    batches = 4000
    balanced, plain = np.empty(batches), np.empty(batches)

    for i in range(batches):
        previous_tasks = rng.integers(0, 3, size=24)
        rows = np.concatenate([np.full(48, task_means[3]), task_means[previous_tasks]])
        x = (rows + rng.standard_normal(72)).reshape(72, 1, 1, 1)
        balanced[i] = balanced_batch_stats(x, comp)[0][0]
        plain[i] = channel_stats(x)[0][0]

    balanced_se = balanced.std(ddof=1) / np.sqrt(batches)
    plain_se = plain.std(ddof=1) / np.sqrt(batches)
    assert abs(balanced.mean() - task_means.mean()) < 4 * balanced_se
    assert abs(plain.mean() - (48 * 4.0 + 24 * 2.0) / 72) < 4 * plain_se
    assert plain.mean() - balanced.mean() > 0.5


@pytest.mark.parametrize("t, bc, bp", [(2, 8, 4), (3, 8, 4), (4, 12, 4)])
def test_balanced_affine_does_not_change_the_layer(rng, t, bc, bp):
    """Test case 3 matches full TBBN: the affine commutes with tiling and averaging."""
    x = rng.standard_normal((bc + bp, 4, 2, 2))
    d_y = rng.standard_normal((bc + bp, 4, 2, 2))
    full = _random_state(4, np.random.default_rng(11), AblationFlags())
    plain_affine = full.copy()
    plain_affine.ablation = AblationFlags.case(3)
    comp = BatchComposition(bc, bp, t)

    y_full, full_cache = tbbn_forward_train(x, comp, full)
    y_case, case_cache = tbbn_forward_train(x, comp, plain_affine)

    np.testing.assert_allclose(y_case, y_full, rtol=0, atol=1e-12)
    np.testing.assert_allclose(plain_affine.running_mean, full.running_mean, atol=1e-12)
    np.testing.assert_allclose(plain_affine.running_var, full.running_var, atol=1e-12)
    for case, ref in zip(
        tbbn_backward(d_y, case_cache, plain_affine), tbbn_backward(d_y, full_cache, full)
    ):
        np.testing.assert_allclose(case, ref, rtol=0, atol=1e-12)


def test_balanced_affine_alone_is_bn(rng):
    """Test case 4 matches plain BN in forward, backward and running statistics."""
    x = rng.standard_normal((12, 4, 2, 2))
    d_y = rng.standard_normal((12, 4, 2, 2))
    bn_state = _random_state(4, np.random.default_rng(13), AblationFlags.case(4))
    tb_state = bn_state.copy()

    y_bn, bn_cache = bn_forward_train(x, bn_state)
    y_tb, tb_cache = tbbn_forward_train(x, BatchComposition(8, 4, 3), tb_state)

    np.testing.assert_allclose(y_tb, y_bn, rtol=0, atol=1e-12)
    np.testing.assert_allclose(tb_state.running_mean, bn_state.running_mean, atol=1e-12)
    np.testing.assert_allclose(tb_state.running_var, bn_state.running_var, atol=1e-12)
    for tb, bn in zip(tbbn_backward(d_y, tb_cache, tb_state), bn_backward(d_y, bn_cache, bn_state)):
        np.testing.assert_allclose(tb, bn, rtol=0, atol=1e-12)
