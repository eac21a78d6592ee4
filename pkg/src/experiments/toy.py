"""
Gaussian toy: running statistics of BN, CN and TBBN under imbalanced batches.

Four tasks, each a 2-D Gaussian with unit covariance and its own mean,
concatenated ten times into 20-dimensional rows. Training batches hold B_c
rows of task 4 and B_p rows drawn uniformly from tasks 1-3. The running
statistics each layer accumulates are compared with the uniform mixture.
"""
from dataclasses import dataclass
import logging
from typing import Dict

import numpy as np
import pandas as pd

from src.experiments.exceptions import ConfigError
from src.experiments.outputs import echo_config, run_directory, write_frame, write_json
from src.models import RunConfig
from src.norm import BatchComposition, NormLayerError, make_norm_layer
from src.tensor import Rng, Tensor, channel_stats, make_rng

logger = logging.getLogger(__name__)

TOY_TASKS = 4
TOY_PAIRS = 10
TOY_TEST_PER_TASK = 250
CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])


@dataclass
class ToyReport:
    """Deviation table, test point cloud and per-seed TBBN-vs-BN wins."""

    deviations: pd.DataFrame
    points: pd.DataFrame
    tbbn_better_dims: Dict[int, int]


def toy_task_means(separation: float) -> np.ndarray:
    """(4, 20) task means: corner i of a square scaled by ``separation``, tiled."""
    return np.tile(CORNERS * separation, (1, TOY_PAIRS))


def sample_rows(means: np.ndarray, tasks: np.ndarray, rng: Rng) -> Tensor:
    """Unit-variance Gaussian rows for the given 0-based task indices."""
    x = means[tasks] + rng.standard_normal((tasks.shape[0], means.shape[1]))
    return x[:, :, None, None]


def _run_seed(config: RunConfig, seed: int):
    train = config.train
    dims = 2 * TOY_PAIRS
    rng = make_rng(seed)
    means = toy_task_means(config.toy_separation)
    comp = BatchComposition(train.batch_current, train.batch_previous, TOY_TASKS)
    try:
        layers = {
            kind: make_norm_layer(kind, dims, groups=train.groups, bessel=train.bessel)
            for kind in ("bn", "cn", "tbbn")
        }
    except NormLayerError as e:
        raise ConfigError(f"toy layers cannot be built: {e}") from e

    current = np.full(train.batch_current, TOY_TASKS - 1)
    for _ in range(config.toy_batches):
        previous = rng.integers(0, TOY_TASKS - 1, size=train.batch_previous)
        x = sample_rows(means, np.concatenate([current, previous]), rng)
        for layer in layers.values():
            layer.forward(x, train=True, composition=comp)

    test_tasks = np.repeat(np.arange(TOY_TASKS), TOY_TEST_PER_TASK)
    test = sample_rows(means, test_tasks, rng)
    population_mean = means.mean(axis=0)
    population_var = 1.0 + means.var(axis=0)

    rows, points = [], []
    for kind, layer in layers.items():
        if kind == "cn":
            target_mean, target_var = channel_stats(layer.stats_input(test))
        else:
            target_mean, target_var = population_mean, population_var
        mean_dev = np.abs(layer.state.running_mean - target_mean)
        var_dev = np.abs(layer.state.running_var - target_var)
        for d in range(dims):
            rows.append(
                {
                    "seed": seed,
                    "layer": kind,
                    "dim": d,
                    "mean_dev": float(mean_dev[d]),
                    "var_dev": float(var_dev[d]),
                }
            )
        y = layer.forward(test, train=False)
        points.append(_cloud(kind, seed, test_tasks, y))
    points.append(_cloud("raw", seed, test_tasks, test))
    return pd.DataFrame(rows), pd.concat(points, ignore_index=True)


def _cloud(layer: str, seed: int, tasks: np.ndarray, y: Tensor) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "seed": seed,
            "layer": layer,
            "task": tasks + 1,
            "d0": y[:, 0, 0, 0],
            "d1": y[:, 1, 0, 0],
        }
    )


def exp_toy_gaussian(config: RunConfig) -> ToyReport:
    """
    Run the toy for every seed and write deviations.csv and points.csv.

    Args:
        config: Uses seeds, toy_batches, toy_separation and the train
            section's B_c, B_p, groups and bessel

    Returns:
        ToyReport over all seeds
    """
    out = run_directory(config, "toy-gaussian")
    echo_config(config, out)
    deviations, clouds, wins = [], [], {}
    for seed in config.seeds:
        dev, cloud = _run_seed(config, seed)
        pivot = dev.pivot(index="dim", columns="layer", values="mean_dev")
        wins[seed] = int((pivot["tbbn"] < pivot["bn"]).sum())
        logger.info(
            f"toy seed {seed}: TBBN mean closer than BN on {wins[seed]}/{len(pivot)} dims"
        )
        deviations.append(dev)
        clouds.append(cloud)

    report = ToyReport(
        deviations=pd.concat(deviations, ignore_index=True),
        points=pd.concat(clouds, ignore_index=True),
        tbbn_better_dims=wins,
    )
    write_frame(report.deviations, out / "deviations.csv")
    write_frame(report.points, out / "points.csv")
    write_json({str(k): v for k, v in wins.items()}, out / "summary.json")
    return report
