"""
Tests for the closed-form BN mean bias.
"""
import numpy as np
import pytest

from src.norm import NormLayerError, expected_bn_mean, expected_bn_mean_bias


def test_imbalanced_example():
    """Test B=64, B_c=48, t=4, mu_i=i: derived gap -1, printed form +1."""
    report = expected_bn_mean_bias([[1.0], [2.0], [3.0], [4.0]], 48, 16, 4)

    assert report.population_mean == pytest.approx([2.5])
    assert report.expected_bn_mean == pytest.approx([3.5])
    assert report.derived_gap == pytest.approx([-1.0])
    assert report.printed_gap == pytest.approx([1.0])


def test_balanced_batch_has_no_gap():
    """Test B_c = B/t gives a zero gap in both forms."""
    report = expected_bn_mean_bias([[1.0, 0.0], [2.0, 5.0], [3.0, -1.0], [9.0, 2.0]], 16, 48, 4)

    np.testing.assert_allclose(report.derived_gap, 0.0, atol=1e-12)
    np.testing.assert_allclose(report.printed_gap, 0.0, atol=1e-12)


def test_equal_task_means_have_no_gap():
    """Test identical task means give a zero gap."""
    report = expected_bn_mean_bias(np.full((3, 2), 1.7), 40, 8, 3)

    np.testing.assert_allclose(report.derived_gap, 0.0, atol=1e-12)


def test_expected_bn_mean_weights():
    """Test the B_c/B_p weighting of the expected batch mean."""
    assert expected_bn_mean([[0.0], [6.0]], 2, 2)[0] == pytest.approx(3.0)


def test_requires_two_tasks():
    """Test t < 2 is rejected."""
    with pytest.raises(NormLayerError):
        expected_bn_mean_bias([[1.0]], 4, 0, 1)


def test_row_count_must_match_task():
    """Test the number of task means must equal t."""
    with pytest.raises(NormLayerError):
        expected_bn_mean_bias([[1.0], [2.0]], 4, 4, 3)
