"""
Fine-tuning (FT) trainer, evaluation and the full class-incremental run.
"""
from dataclasses import dataclass
import logging
from typing import Iterable, Optional

import numpy as np

from src.cil.batches import TaskBatch, compose_batch
from src.cil.exceptions import EmptySourceError, HarnessError, NumericFailureError
from src.cil.memory import ExemplarMemory, memory_update
from src.cil.model import TinyModel, sgd_step
from src.cil.modules import softmax_cross_entropy
from src.cil.stream import TaskStream
from src.metrics import AccuracyMatrix
from src.models import TrainConfig
from src.norm import BatchComposition
from src.tensor import Rng, make_rng

logger = logging.getLogger(__name__)


def fit_batches(
    model: TinyModel,
    batches: Iterable[TaskBatch],
    lr: float,
    weight_decay: float,
    train: bool = True,
    only: Optional[tuple] = None,
) -> float:
    """
    One SGD step per batch; returns the mean loss.

    Args:
        model: Model to update in place
        batches: Composed batches
        lr: Learning rate
        weight_decay: L2 coefficient
        train: Train-mode normalization; False back-propagates through the
            eval map with frozen running statistics
        only: Parameter keys to update, all when None

    Raises:
        NumericFailureError: On a non-finite loss or floating-point fault
    """
    losses = []
    for batch in batches:
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                logits = model.forward(
                    batch.x, train=train, composition=batch.composition, keep_graph=True
                )
                loss, d_logits = softmax_cross_entropy(logits, batch.y)
                model.backward(d_logits)
                sgd_step(model, lr, weight_decay, only=only)
        except FloatingPointError as e:
            raise NumericFailureError(f"floating-point fault during training: {e}") from e
        if not np.isfinite(loss):
            raise NumericFailureError(f"non-finite loss {loss}")
        losses.append(loss)
    return float(np.mean(losses)) if losses else float("nan")


def _task_batches(task, memory, bc, bp, rng):
    order = rng.permutation(task.train_size)
    for start in range(0, task.train_size - bc + 1, bc):
        yield compose_batch(
            task, memory, bc, bp, rng, current_idx=order[start : start + bc]
        )


def train_task(
    model: TinyModel,
    stream: TaskStream,
    t: int,
    config: TrainConfig,
    memory: Optional[ExemplarMemory] = None,
    rng: Optional[Rng] = None,
) -> TinyModel:
    """
    Fine-tune on task t with exemplar replay.

    Each step uses B_c shuffled current-task rows followed by B_p rows drawn
    from memory; the loss is cross-entropy over all C_t classes.

    Args:
        model: Model with a head of at least C_t outputs
        stream: Task stream
        t: 1-based task index
        config: Training knobs
        memory: Exemplar memory (ignored for t = 1)
        rng: Random source, seeded from config.seed and t when omitted

    Returns:
        The same model, trained in place

    Raises:
        HarnessError: If the head is narrower than C_t
        NumericFailureError: If training diverges
    """
    task = stream.task(t)
    seen = stream.classes_seen(t)
    if model.num_classes < seen:
        raise HarnessError(
            f"head has {model.num_classes} outputs, task {t} needs {seen}"
        )
    rng = rng if rng is not None else make_rng(config.seed * 1000 + t)
    if task.train_size == 0:
        raise EmptySourceError(f"task {t} has no training samples")

    bp = config.batch_previous if t > 1 else 0
    if t > 1 and bp > 0 and (memory is None or len(memory) == 0):
        logger.warning(f"task {t}: exemplar memory is empty, training without replay")
        bp = 0
    bc = min(config.batch_current, task.train_size)

    logger.info(f"training task {t}: B_c={bc}, B_p={bp}, {config.epochs} epochs")
    for epoch in range(config.epochs):
        loss = fit_batches(
            model,
            _task_batches(task, memory, bc, bp, rng),
            config.lr,
            config.weight_decay,
        )
        logger.debug(f"task {t} epoch {epoch + 1}: loss {loss:.4f}")
    return model


def train_joint(
    model: TinyModel,
    stream: TaskStream,
    config: TrainConfig,
    rng: Optional[Rng] = None,
) -> TinyModel:
    """
    Upper-bound training on the union of all tasks with uniform batches.

    Batches hold B_c + B_p rows sampled without replacement from the union
    and are normalized as single-task batches.
    """
    rng = rng if rng is not None else make_rng(config.seed)
    x, y = stream.union(stream.num_tasks)
    model.grow_head(stream.classes_seen(stream.num_tasks))
    size = min(config.batch_current + config.batch_previous, y.shape[0])

    def batches():
        order = rng.permutation(y.shape[0])
        for start in range(0, y.shape[0] - size + 1, size):
            idx = order[start : start + size]
            yield TaskBatch(x[idx], y[idx], BatchComposition.plain(size))

    logger.info(f"joint training on {y.shape[0]} samples, {config.epochs} epochs")
    for epoch in range(config.epochs):
        loss = fit_batches(model, batches(), config.lr, config.weight_decay)
        logger.debug(f"joint epoch {epoch + 1}: loss {loss:.4f}")
    return model


def evaluate(model: TinyModel, stream: TaskStream, upto_t: int) -> np.ndarray:
    """
    Test accuracy on tasks 1..upto_t with eval-mode normalization.

    Returns:
        Array of length upto_t, entry i-1 = accuracy on task i
    """
    accuracies = []
    for i in range(1, upto_t + 1):
        task = stream.task(i)
        if task.test_y.size == 0:
            raise EmptySourceError(f"task {i} has no test samples")
        preds = model.predict(task.test_x)
        accuracies.append(float(np.mean(preds == task.test_y)))
    return np.array(accuracies)


@dataclass
class CilRun:
    """Outcome of one class-incremental run."""

    matrix: AccuracyMatrix
    model: TinyModel
    memory: ExemplarMemory


def run_cil(stream: TaskStream, config: TrainConfig, seed: int) -> CilRun:
    """
    Train FT through every task of the stream and fill the accuracy matrix.

    Args:
        stream: Task stream
        config: Training knobs
        seed: Seed for initialization, batch order and memory selection

    Returns:
        CilRun with the accuracy matrix, final model and memory
    """
    rng = make_rng(seed)
    model = TinyModel.from_config(
        config, stream.in_shape, stream.classes_per_task, seed=seed
    )
    memory = ExemplarMemory(config.memory_size)
    matrix = AccuracyMatrix(stream.num_tasks)
    for t in range(1, stream.num_tasks + 1):
        model.grow_head(stream.classes_seen(t))
        train_task(model, stream, t, config, memory, rng)
        memory_update(memory, stream.task(t), rng)
        matrix.set_row(t, evaluate(model, stream, t))
        logger.info(f"after task {t}: accuracies {np.round(matrix.row(t), 3).tolist()}")
    return CilRun(matrix=matrix, model=model, memory=memory)
