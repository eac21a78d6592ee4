"""
Desk-scale exemplar-based class-incremental learning harness.
"""
from src.cil.exceptions import (
    HarnessError,
    EmptySourceError,
    IdxFormatError,
    NumericFailureError,
)
from src.cil.stream import TaskData, TaskStream, synthetic_stream
from src.cil.idx import read_idx, load_idx_stream, IMAGE_MAGIC, LABEL_MAGIC
from src.cil.memory import ExemplarMemory, memory_update
from src.cil.batches import TaskBatch, compose_batch
from src.cil.model import TinyModel, sgd_step
from src.cil.trainer import (
    CilRun,
    evaluate,
    fit_batches,
    run_cil,
    train_joint,
    train_task,
)
from src.cil.oracle import oracle_recompute_stats, oracle_retrain_affine

__all__ = [
    "HarnessError",
    "EmptySourceError",
    "IdxFormatError",
    "NumericFailureError",
    "TaskData",
    "TaskStream",
    "synthetic_stream",
    "read_idx",
    "load_idx_stream",
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "ExemplarMemory",
    "memory_update",
    "TaskBatch",
    "compose_batch",
    "TinyModel",
    "sgd_step",
    "CilRun",
    "evaluate",
    "fit_batches",
    "run_cil",
    "train_joint",
    "train_task",
    "oracle_recompute_stats",
    "oracle_retrain_affine",
]
