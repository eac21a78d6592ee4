"""
Closed-form bias of the BN batch mean under imbalanced task composition.
"""
import numpy as np
from numpy.typing import ArrayLike

from src.models import MeanBiasReport
from src.norm.exceptions import NormLayerError


def expected_bn_mean(
    task_means: ArrayLike, batch_current: int, batch_previous: int
) -> np.ndarray:
    """
    Expectation of BN's batch mean when B_c rows come from the last task and
    B_p rows are drawn uniformly from the earlier ones.
    """
    means = np.atleast_2d(np.asarray(task_means, dtype=np.float64))
    t = means.shape[0]
    total = batch_current + batch_previous
    previous = means[:-1].sum(axis=0)
    return (batch_current * means[-1] + (batch_previous / (t - 1)) * previous) / total


def expected_bn_mean_bias(
    task_means: ArrayLike, batch_current: int, batch_previous: int, task: int
) -> MeanBiasReport:
    """
    Gap between the uniform population mean and BN's expected batch mean.

    Args:
        task_means: Array (t, C) of per-task population means
        batch_current: B_c
        batch_previous: B_p
        task: t, the current task index (>= 2)

    Returns:
        MeanBiasReport with the derived gap mu* - E[mu_BN] and, for
        comparison, the closed form as usually printed, whose terms carry
        the opposite sign (it equals E[mu_BN] - mu*).

    Raises:
        NormLayerError: If t < 2 or task_means has the wrong number of rows
    """
    if task < 2:
        raise NormLayerError(f"mean bias is defined for t >= 2, got t={task}")
    means = np.atleast_2d(np.asarray(task_means, dtype=np.float64))
    if means.shape[0] != task:
        raise NormLayerError(f"expected {task} task means, got {means.shape[0]}")

    total = batch_current + batch_previous
    population = means.mean(axis=0)
    expected = expected_bn_mean(means, batch_current, batch_previous)
    printed = (total - batch_current * task) / (task * (task - 1) * total) * means.sum(
        axis=0
    ) + (batch_current * task - total) / ((task - 1) * total) * means[-1]

    return MeanBiasReport(
        derived_gap=(population - expected).tolist(),
        printed_gap=printed.tolist(),
        expected_bn_mean=expected.tolist(),
        population_mean=population.tolist(),
    )
