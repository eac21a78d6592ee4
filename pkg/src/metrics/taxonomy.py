"""
Misclassifications bucketed by where a sample came from and where it went.
"""
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from src.metrics.exceptions import UnseenClassError
from src.models import MisclassCounts


def misclass_taxonomy(
    predictions: ArrayLike,
    labels: ArrayLike,
    task_of_class: Sequence[int],
    current_task: Optional[int] = None,
) -> MisclassCounts:
    """
    Count errors as C->P, C->C, P->C and P->P.

    C is the current (last) task and P every earlier task. A wrong class
    inside the same group counts as C->C or P->P.

    Args:
        predictions: Predicted class per sample
        labels: True class per sample
        task_of_class: 1-based task index of every class
        current_task: Task treated as current, defaults to the largest index

    Returns:
        MisclassCounts including the (source task x predicted task) grid of
        errors, with rows and columns indexed from task 1

    Raises:
        UnseenClassError: If a prediction or label has no owning task
    """
    preds = np.asarray(predictions, dtype=np.int64).ravel()
    truth = np.asarray(labels, dtype=np.int64).ravel()
    owner = np.asarray(task_of_class, dtype=np.int64)
    num_classes = owner.shape[0]
    for name, values in (("prediction", preds), ("label", truth)):
        bad = values[(values < 0) | (values >= num_classes)]
        if bad.size:
            raise UnseenClassError(
                f"{name} class {int(bad[0])} is not among the {num_classes} seen classes"
            )

    current = int(owner.max()) if current_task is None else current_task
    wrong = preds != truth
    source = owner[truth[wrong]]
    target = owner[preds[wrong]]
    from_current = source == current
    to_current = target == current

    tasks = int(owner.max())
    grid = np.zeros((tasks, tasks), dtype=np.int64)
    np.add.at(grid, (source - 1, target - 1), 1)

    return MisclassCounts(
        c_to_p=int(np.sum(from_current & ~to_current)),
        c_to_c=int(np.sum(from_current & to_current)),
        p_to_c=int(np.sum(~from_current & to_current)),
        p_to_p=int(np.sum(~from_current & ~to_current)),
        task_grid=grid.tolist(),
    )
