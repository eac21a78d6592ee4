"""
Class-incremental experiments: single-kind runs, ablations and the oracle study.
"""
from dataclasses import dataclass
import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from src.cil import (
    TaskStream,
    TinyModel,
    evaluate,
    load_idx_stream,
    oracle_recompute_stats,
    oracle_retrain_affine,
    run_cil,
    synthetic_stream,
    train_joint,
)
from src.experiments.checkpoint import load_checkpoint, save_checkpoint
from src.experiments.outputs import (
    echo_config,
    run_directory,
    write_frame,
    write_json,
)
from src.metrics import (
    AccuracyMatrix,
    accuracy_curve,
    misclass_taxonomy,
    summarize,
    write_matrix_csv,
)
from src.models import AblationFlags, MetricsReport, MisclassCounts, RunConfig, TrainConfig
from src.tensor import make_rng

logger = logging.getLogger(__name__)

METRIC_NAMES = ("final_accuracy", "average_accuracy", "forgetting", "learning_accuracy")


@dataclass
class SeedResult:
    """Outputs of one seed of a CIL run."""

    seed: int
    matrix: AccuracyMatrix
    metrics: MetricsReport
    taxonomy: MisclassCounts


@dataclass
class CilReport:
    """Per-seed results and their means."""

    label: str
    results: List[SeedResult]
    mean: MetricsReport

    @property
    def p_to_c(self) -> int:
        """Total biased predictions over seeds."""
        return self.taxonomy.p_to_c

    @property
    def taxonomy(self) -> MisclassCounts:
        """Misclassification buckets and task grids summed over seeds."""
        grids = [np.asarray(r.taxonomy.task_grid, dtype=np.int64) for r in self.results]
        return MisclassCounts(
            c_to_p=sum(r.taxonomy.c_to_p for r in self.results),
            c_to_c=sum(r.taxonomy.c_to_c for r in self.results),
            p_to_c=sum(r.taxonomy.p_to_c for r in self.results),
            p_to_p=sum(r.taxonomy.p_to_p for r in self.results),
            task_grid=np.sum(grids, axis=0).tolist() if grids else [],
        )


def build_stream(config: RunConfig, seed: int) -> TaskStream:
    """IDX stream when both IDX paths are set, otherwise the synthetic stream."""
    stream_cfg = config.stream
    if stream_cfg.idx_images and stream_cfg.idx_labels:
        stream = load_idx_stream(
            stream_cfg.idx_images,
            stream_cfg.idx_labels,
            stream_cfg.classes_per_task,
            seed=seed,
            layout=config.train.arch,
        )
        stream.tasks = stream.tasks[: stream_cfg.tasks]
        return stream
    return synthetic_stream(stream_cfg, seed)


def mean_metrics(results: List[SeedResult]) -> MetricsReport:
    """Average each metric over seeds."""
    return MetricsReport(
        **{
            name: float(np.mean([getattr(r.metrics, name) for r in results]))
            for name in METRIC_NAMES
        }
    )


def _final_taxonomy(model: TinyModel, stream: TaskStream) -> MisclassCounts:
    x, y = stream.union(stream.num_tasks, split="test")
    return misclass_taxonomy(model.predict(x), y, stream.task_of_class())


def run_seeds(config: RunConfig, train: TrainConfig, label: str) -> CilReport:
    """
    Run one configuration over every seed and write its per-seed outputs.

    Each seed gets ``<out>/<experiment>/<label>/seed_<s>/`` with config.json,
    matrix.csv, curve.csv, metrics.json and taxonomy.json.
    """
    results = []
    for seed in config.seeds:
        seeded = train.model_copy(update={"seed": seed})
        stream = build_stream(config, seed)
        run = run_cil(stream, seeded, seed)
        metrics = summarize(run.matrix)
        taxonomy = _final_taxonomy(run.model, stream)

        out = run_directory(config, config.experiment, label, f"seed_{seed}")
        echo_config(config.model_copy(update={"train": seeded}), out)
        write_matrix_csv(run.matrix, out / "matrix.csv")
        curve = accuracy_curve(run.matrix)
        write_frame(
            pd.DataFrame({"task": range(1, len(curve) + 1), "average_accuracy": curve}),
            out / "curve.csv",
        )
        write_json(metrics, out / "metrics.json")
        write_json(taxonomy, out / "taxonomy.json")
        logger.info(
            f"{label} seed {seed}: A_f={metrics.final_accuracy:.4f} "
            f"F={metrics.forgetting:.4f} P->C={taxonomy.p_to_c}"
        )
        results.append(SeedResult(seed, run.matrix, metrics, taxonomy))
    return CilReport(label=label, results=results, mean=mean_metrics(results))


def _summary_frame(report: CilReport) -> pd.DataFrame:
    rows = [
        {"seed": r.seed, **r.metrics.model_dump(), "p_to_c": r.taxonomy.p_to_c}
        for r in report.results
    ]
    rows.append({"seed": "mean", **report.mean.model_dump(), "p_to_c": report.p_to_c})
    return pd.DataFrame(rows)


def exp_cil_run(config: RunConfig) -> CilReport:
    """
    Full T-task FT run with the configured normalization over every seed.

    Writes per-seed outputs plus summary.csv with the across-seed mean.
    """
    report = run_seeds(config, config.train, config.train.norm)
    out = run_directory(config, config.experiment, config.train.norm)
    write_frame(_summary_frame(report), out / "summary.csv")
    totals = report.taxonomy
    logger.info(
        f"{config.train.norm}: {totals.total} errors over seeds, largest bucket "
        f"{totals.largest_bucket()} (P->C={totals.p_to_c})"
    )
    return report


def ablation_variants(train: TrainConfig) -> Dict[str, TrainConfig]:
    """Full TBBN, the four ablation cases and plain BN."""
    variants = {"tbbn": train.model_copy(update={"norm": "tbbn", "ablation": AblationFlags()})}
    for number in range(1, 5):
        variants[f"case{number}"] = train.model_copy(
            update={"norm": "tbbn", "ablation": AblationFlags.case(number)}
        )
    variants["bn"] = train.model_copy(update={"norm": "bn", "ablation": AblationFlags()})
    return variants


def exp_ablation(config: RunConfig) -> pd.DataFrame:
    """
    TBBN against its ablation cases and BN; writes ablation.csv.

    Returns:
        One row per variant with mean A_f, A_a, F and the chance level
    """
    chance = 1.0 / (config.stream.tasks * config.stream.classes_per_task)
    rows = []
    for label, train in ablation_variants(config.train).items():
        report = run_seeds(config, train, label)
        rows.append(
            {
                "variant": label,
                "flags": train.ablation.label() if train.norm == "tbbn" else "",
                "final_accuracy": report.mean.final_accuracy,
                "average_accuracy": report.mean.average_accuracy,
                "forgetting": report.mean.forgetting,
                "chance": chance,
            }
        )
    frame = pd.DataFrame(rows)
    out = run_directory(config, config.experiment)
    echo_config(config, out)
    write_frame(frame, out / "ablation.csv")
    return frame


def _accuracy_row(seed: int, variant: str, accuracies: np.ndarray) -> dict:
    row = {"seed": seed, "variant": variant}
    row.update({f"task_{i}": float(a) for i, a in enumerate(accuracies, start=1)})
    row["average"] = float(np.mean(accuracies))
    return row


def exp_oracle(config: RunConfig) -> pd.DataFrame:
    """
    FT, stats-only oracle, stats+affine oracle and joint training per seed.

    The FT model is checkpointed once and restored before each oracle
    variant. Writes oracle.csv.

    Returns:
        One row per (seed, variant) with final per-task accuracies and their mean
    """
    rows = []
    train = config.train
    for seed in config.seeds:
        seeded = train.model_copy(update={"seed": seed})
        stream = build_stream(config, seed)
        total = stream.num_tasks
        run = run_cil(stream, seeded, seed)
        out = run_directory(config, config.experiment, f"seed_{seed}")
        ckpt = save_checkpoint(run.model, out / "ft.ckpt")
        rows.append(_accuracy_row(seed, "ft", evaluate(run.model, stream, total)))

        x, y = stream.union(total)
        stats_only = oracle_recompute_stats(load_checkpoint(ckpt), x)
        rows.append(_accuracy_row(seed, "stats", evaluate(stats_only, stream, total)))

        affine = oracle_recompute_stats(load_checkpoint(ckpt), x)
        oracle_retrain_affine(affine, x, y, seeded, make_rng(seed + 1))
        rows.append(_accuracy_row(seed, "stats_affine", evaluate(affine, stream, total)))

        joint = TinyModel.from_config(
            seeded, stream.in_shape, stream.classes_seen(total), seed=seed
        )
        train_joint(joint, stream, seeded, make_rng(seed + 2))
        rows.append(_accuracy_row(seed, "joint", evaluate(joint, stream, total)))
        logger.info(
            f"oracle seed {seed}: "
            + ", ".join(f"{r['variant']}={r['average']:.4f}" for r in rows[-4:])
        )

    frame = pd.DataFrame(rows)
    out = run_directory(config, config.experiment)
    echo_config(config, out)
    write_frame(frame, out / "oracle.csv")
    return frame
