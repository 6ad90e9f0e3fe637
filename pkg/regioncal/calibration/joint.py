"""Joint calibration of all classes against the final pixel labeling.

Instead of calibrating each classifier on its own, all sigmoid parameters are
fitted together, so that the labeling after the maximum over classes and regions
gives the lowest loss on the training set. For fully supervised data that is the
class-average pixel accuracy, which prevents small classes from being suppressed
by the large (background) classes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from regioncal.datasets import Dataset
from regioncal.types import LossKind, ScoreMatrix

from .descent import TraceStep, coordinate_descent
from .losses import LossEvaluator, column_cache_size
from .sigmoid import CalibrationParams, GridSpec

logger = logging.getLogger(__name__)

__all__ = ["CalibrationResult", "TraceStep", "joint_calibrate"]


@dataclass
class CalibrationResult:
    """The outcome of a calibration method.

    This unpacks as ``params, trace = result``.
    """

    params: CalibrationParams
    trace: list[TraceStep] = field(default_factory=list)
    method: str = "jc"
    loss_kind: Optional[LossKind] = None

    initial_loss: Optional[float] = None
    final_loss: Optional[float] = None
    sweeps: int = 0

    def __iter__(self):
        return iter((self.params, self.trace))


def joint_calibrate(
    dataset: Dataset,
    scores: Sequence[ScoreMatrix],
    kind: Optional[LossKind] = None,
    grid: Optional[GridSpec] = None,
    jobs: int = 1,
) -> CalibrationResult:
    """Fit the sigmoid parameters of all classes with coordinate descent.

    :param scores: The raw score matrix of every training image, computed once.
    :param kind: The loss to minimize; by default the loss that fits the supervision.
    """
    grid = grid or GridSpec()
    grid.validate()
    kind = kind or LossKind.for_supervision(dataset.supervision)

    evaluator = LossEvaluator(
        dataset,
        scores,
        kind,
        jobs=jobs,
        cache_size=column_cache_size(dataset.class_count, grid.points),
    )
    descent = coordinate_descent(evaluator, grid.initial_params(dataset.class_count), grid)

    logger.info(
        "Joint calibration (%s loss) went from %.6f to %.6f in %d sweeps, %d steps",
        kind,
        descent.initial_loss,
        descent.final_loss,
        descent.sweeps,
        len(descent.trace),
    )
    return CalibrationResult(
        params=descent.params,
        trace=descent.trace,
        method="jc",
        loss_kind=kind,
        initial_loss=descent.initial_loss,
        final_loss=descent.final_loss,
        sweeps=descent.sweeps,
    )
