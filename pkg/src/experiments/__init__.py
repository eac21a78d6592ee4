"""
Experiment drivers, checkpoints and output writers.
"""
from src.experiments.exceptions import ExperimentError, ConfigError, CheckpointError
from src.experiments.checkpoint import save_checkpoint, load_checkpoint
from src.experiments.outputs import (
    run_directory,
    write_json,
    write_frame,
    read_frame,
    echo_config,
)
from src.experiments.toy import ToyReport, exp_toy_gaussian, toy_task_means
from src.experiments.bias import bias_grid, exp_bias_check, monte_carlo_batch_means
from src.experiments.cil_runs import (
    CilReport,
    SeedResult,
    ablation_variants,
    build_stream,
    exp_ablation,
    exp_cil_run,
    exp_oracle,
    run_seeds,
)
from src.experiments.runner import EXPERIMENTS, run_experiment

__all__ = [
    "ExperimentError",
    "ConfigError",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "run_directory",
    "write_json",
    "write_frame",
    "read_frame",
    "echo_config",
    "ToyReport",
    "exp_toy_gaussian",
    "toy_task_means",
    "bias_grid",
    "exp_bias_check",
    "monte_carlo_batch_means",
    "CilReport",
    "SeedResult",
    "ablation_variants",
    "build_stream",
    "exp_ablation",
    "exp_cil_run",
    "exp_oracle",
    "run_seeds",
    "EXPERIMENTS",
    "run_experiment",
]
