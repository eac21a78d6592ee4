"""
Command-line entry point: ``python -m src.main <subcommand> [options]``.
"""
import argparse
import logging
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from src.cil import NumericFailureError
from src.config import get_settings
from src.experiments import (
    CilReport,
    ConfigError,
    EXPERIMENTS,
    ExperimentError,
    ToyReport,
    run_experiment,
)
from src.gradcheck import GradCheckError, NonFiniteValueError, check_layer
from src.models import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="run a single seed")
    parser.add_argument("--norm", choices=["bn", "gn", "cn", "tbbn"])
    parser.add_argument("--groups", type=int, help="GN/CN group count")
    parser.add_argument("--bc", type=int, help="current-task rows per batch")
    parser.add_argument("--bp", type=int, help="exemplar rows per batch")
    parser.add_argument("--tasks", type=int, help="number of tasks")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--bessel", choices=["on", "off"])


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment plus gradcheck."""
    parser = argparse.ArgumentParser(
        prog="tbnorm", description="Task-balanced normalization experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_run_flags(sub.add_parser(name, help=f"run the {name} experiment"))

    grad = sub.add_parser("gradcheck", help="finite-difference check of one layer")
    grad.add_argument("--layer", choices=["bn", "gn", "cn", "tbbn"], default="bn")
    grad.add_argument("--shape", default="8,4,3,3", help="N,C,H,W")
    grad.add_argument("--t", type=int, default=1, help="task index (tbbn)")
    grad.add_argument("--bc", type=int, help="current-task rows (tbbn)")
    grad.add_argument("--bp", type=int, default=0, help="exemplar rows (tbbn)")
    grad.add_argument("--groups", type=int, help="GN/CN group count")
    grad.add_argument("--seed", type=int, help="defaults to TBNORM_DEFAULT_SEED")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """
    Config file (or defaults) with command-line flags applied on top.

    Raises:
        ConfigError: If the file or a flag value is invalid
    """
    settings = get_settings()
    try:
        base = (
            RunConfig.from_file(args.config)
            if args.config
            else RunConfig(output_dir=settings.output_dir)
        )
        seed = None if args.seed is None else str(args.seed)
        return base.with_overrides(
            {
                "experiment": args.command,
                "seeds": seed,
                "seed": seed,
                "norm": args.norm,
                "groups": None if args.groups is None else str(args.groups),
                "bc": None if args.bc is None else str(args.bc),
                "bp": None if args.bp is None else str(args.bp),
                "tasks": None if args.tasks is None else str(args.tasks),
                "out": args.out,
                "bessel": args.bessel,
            }
        )
    except (ValidationError, ValueError, OSError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def parse_shape(text: str) -> tuple:
    """Parse "N,C,H,W"."""
    try:
        shape = tuple(int(part) for part in text.split(","))
    except ValueError as e:
        raise ConfigError(f"shape must be four integers, got {text!r}") from e
    if len(shape) != 4 or min(shape) < 1:
        raise ConfigError(f"shape must be four positive integers, got {text!r}")
    return shape


def summarize_result(name: str, result) -> str:
    """One-line summary printed after an experiment."""
    if isinstance(result, CilReport):
        m = result.mean
        return (
            f"{name} [{result.label}]: A_f={m.final_accuracy:.4f} "
            f"A_a={m.average_accuracy:.4f} F={m.forgetting:.4f} "
            f"A_l={m.learning_accuracy:.4f}"
            f" largest error bucket={result.taxonomy.largest_bucket()}"
        )
    if isinstance(result, ToyReport):
        wins = ", ".join(f"seed {s}: {n}/20" for s, n in result.tbbn_better_dims.items())
        return f"{name}: TBBN running mean closer than BN on {wins}"
    if isinstance(result, pd.DataFrame):
        return f"{name}: {len(result)} rows written"
    return f"{name}: done"


def run_gradcheck(args: argparse.Namespace) -> int:
    """Run one layer check and print its report as JSON."""
    seed = args.seed if args.seed is not None else get_settings().default_seed
    report = check_layer(
        args.layer,
        parse_shape(args.shape),
        t=args.t,
        bc=args.bc,
        bp=args.bp,
        seed=seed,
        groups=args.groups,
    )
    print(report.model_dump_json(indent=2))
    return EXIT_OK if report.passed else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the subcommand and map failures to exit codes.

    Returns:
        0 on success, 2 on a configuration error, 3 on a numeric failure,
        1 on any other experiment failure
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "gradcheck":
            return run_gradcheck(args)
        config = load_config(args)
        result = run_experiment(config)
        print(summarize_result(args.command, result))
        return EXIT_OK
    except (NumericFailureError, NonFiniteValueError, FloatingPointError) as e:
        logger.error(f"numeric failure: {e}")
        return EXIT_NUMERIC
    except (ConfigError, GradCheckError) as e:
        logger.error(f"configuration error: {e}")
        return EXIT_CONFIG
    except ExperimentError as e:
        logger.error(f"experiment failed: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
