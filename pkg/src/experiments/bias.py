"""
Monte Carlo check of BN's batch-mean bias under imbalanced composition.
"""
import logging
from typing import List, Tuple

import numpy as np
import pandas as pd

from src.experiments.exceptions import ConfigError
from src.experiments.outputs import echo_config, run_directory, write_frame
from src.models import RunConfig
from src.norm import expected_bn_mean_bias
from src.tensor import Rng, channel_stats, make_rng, spawn

logger = logging.getLogger(__name__)

GRID_TASKS = (2, 4)
GRID_STEP = 8


def bias_grid(batch_current: int, batch_previous: int) -> List[Tuple[int, int, int]]:
    """
    (B_c, B_p, t) points to evaluate.

    For every t that divides B = B_c + B_p, B_c runs over a fixed step with
    B_p = B - B_c. The configured (B_c, B_p) is always included for every t.
    """
    batch_size = batch_current + batch_previous
    grid = set()
    for t in GRID_TASKS:
        grid.add((batch_current, batch_previous, t))
        if batch_size % t:
            continue
        for bc in range(GRID_STEP, batch_size, GRID_STEP):
            grid.add((bc, batch_size - bc, t))
    return sorted(grid, key=lambda point: (point[2], point[0]))


def monte_carlo_batch_means(
    task_means: np.ndarray,
    bc: int,
    bp: int,
    batches: int,
    rng: Rng,
    chunk: int = 10_000,
) -> np.ndarray:
    """
    BN batch means of sampled unit-variance scalar Gaussian batches.

    Current rows come from the last task; each exemplar row picks one of the
    earlier tasks uniformly. Each sampled batch occupies one channel of a
    (B, batches, 1, 1) tensor, so ``channel_stats`` yields one batch mean
    per channel.
    """
    t = task_means.shape[0]
    size = bc + bp
    means = []
    for start in range(0, batches, chunk):
        n = min(chunk, batches - start)
        tasks = np.empty((size, n), dtype=np.int64)
        tasks[:bc] = t - 1
        tasks[bc:] = rng.integers(0, t - 1, size=(bp, n))
        rows = task_means[tasks] + rng.standard_normal((size, n))
        mean, _ = channel_stats(rows[:, :, None, None])
        means.append(mean)
    return np.concatenate(means)


def exp_bias_check(config: RunConfig) -> pd.DataFrame:
    """
    Compare Monte Carlo BN mean gaps with the closed form over a (B_c, B_p, t) grid.

    Task means are 1, 2, ..., t. Writes bias_grid.csv.

    Args:
        config: Uses B_c, B_p, mc_batches and the first seed

    Returns:
        One row per grid point with Monte Carlo and closed-form gaps

    Raises:
        ConfigError: If the grid has no points
    """
    batch_current = config.train.batch_current
    batch_previous = config.train.batch_previous
    grid = bias_grid(batch_current, batch_previous)
    if not grid:
        raise ConfigError(f"no bias grid points for B_c={batch_current}, B_p={batch_previous}")

    rows = []
    children = spawn(make_rng(config.seeds[0]), len(grid))
    for (bc, bp, t), rng in zip(grid, children):
        task_means = np.arange(1, t + 1, dtype=np.float64)
        report = expected_bn_mean_bias(task_means[:, None], bc, bp, t)
        samples = monte_carlo_batch_means(task_means, bc, bp, config.mc_batches, rng)
        mc_gap = float(task_means.mean() - samples.mean())
        mc_se = float(samples.std(ddof=1) / np.sqrt(samples.shape[0]))
        derived = report.derived_gap[0]
        rows.append(
            {
                "batch_current": bc,
                "batch_previous": bp,
                "task": t,
                "balanced": bc * t == bc + bp,
                "mc_gap": mc_gap,
                "mc_se": mc_se,
                "derived_gap": derived,
                "printed_gap": report.printed_gap[0],
                "within_3se": abs(mc_gap - derived) <= 3.0 * mc_se,
            }
        )
        logger.debug(f"bias B_c={bc} B_p={bp} t={t}: mc={mc_gap:.4f} derived={derived:.4f}")

    frame = pd.DataFrame(rows)
    out = run_directory(config, "bias-check")
    echo_config(config, out)
    write_frame(frame, out / "bias_grid.csv")
    logger.info(
        f"bias check: {int(frame['within_3se'].sum())}/{len(frame)} grid points within 3 SE"
    )
    return frame
