"""Platt scaling, as baseline for the joint calibration.

Each class is calibrated on its own, by minimizing the cross-entropy between
the calibrated region scores and smoothed binary targets. The optimizer is the
same grid coordinate descent as the joint calibration, so both methods only
differ in the loss they minimize.

Only region proposals have a score, so ground-truth region samples are not used.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from regioncal.datasets import Dataset
from regioncal.exceptions import DimensionMismatch, TrainingFailed
from regioncal.types import ScoreMatrix

from .descent import DescentResult, coordinate_descent
from .joint import CalibrationResult
from .sigmoid import GridSpec, sigmoid

logger = logging.getLogger(__name__)

#: Calibrated scores are clipped to [EPSILON, 1 - EPSILON] inside the cross-entropy.
EPSILON = 1e-15

__all__ = ["platt_targets", "cross_entropy", "platt_fit", "platt_calibrate"]


def platt_targets(labels: np.ndarray) -> np.ndarray:
    """The smoothed targets.

    Positives get ``(N+ + 1) / (N+ + 2)``, negatives get ``1 / (N- + 2)``.
    """
    labels = np.asarray(labels)
    positive = labels > 0
    n_positive = int(positive.sum())
    n_negative = len(labels) - n_positive
    return np.where(positive, (n_positive + 1) / (n_positive + 2), 1.0 / (n_negative + 2))


def cross_entropy(scores: np.ndarray, targets: np.ndarray, a: float, b: float) -> float:
    calibrated = np.clip(sigmoid(scores, a, b), EPSILON, 1.0 - EPSILON)
    return float(
        -np.sum(targets * np.log(calibrated) + (1.0 - targets) * np.log(1.0 - calibrated))
    )


def _fit(scores, labels, grid: GridSpec) -> DescentResult:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise DimensionMismatch("labels", f"Got {len(scores)} scores but {len(labels)} labels.")
    if not np.isin(labels, (-1, 1)).all():
        raise TrainingFailed("platt_fit", "Platt scaling expects labels of +1 and -1.")
    if not (labels > 0).any() or not (labels < 0).any():
        raise TrainingFailed(
            "platt_fit", "Platt scaling needs at least one positive and one negative sample."
        )
    if not np.isfinite(scores).all():
        raise TrainingFailed("platt_fit", "Platt scaling needs finite scores.")

    targets = platt_targets(labels)
    return coordinate_descent(
        lambda params: cross_entropy(scores, targets, *params[0]),
        grid.initial_params(1),
        grid,
    )


def platt_fit(scores, labels, grid: Optional[GridSpec] = None) -> tuple[float, float]:
    """Fit ``(a, b)`` for a single class.

    :param labels: +1 for positive samples, -1 for negative samples.
    """
    grid = grid or GridSpec()
    grid.validate()
    return _fit(scores, labels, grid).params[0]


def platt_calibrate(
    dataset: Dataset,
    scores: Sequence[ScoreMatrix],
    samples,
    grid: Optional[GridSpec] = None,
) -> CalibrationResult:
    """Calibrate every class independently with Platt scaling.

    :param samples: The :class:`~regioncal.svm.samples.TrainingSet` the classifiers
        were trained with. Its region samples provide the scores and labels.
    """
    grid = grid or GridSpec()
    grid.validate()
    params = grid.initial_params(dataset.class_count)
    trace = []
    initial_loss = final_loss = 0.0

    for class_id in range(dataset.class_count):
        class_samples = samples[class_id]
        positives = _sample_scores(scores, class_samples.positives, class_id)
        negatives = _sample_scores(scores, class_samples.negatives, class_id)
        usable = (
            len(positives)
            and len(negatives)
            and np.isfinite(positives).all()
            and np.isfinite(negatives).all()
        )
        if not usable:
            logger.warning(
                "Class %d has no usable positive and negative regions,"
                " keeping the initial calibration.",
                class_id,
            )
            continue

        labels = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
        descent = _fit(np.concatenate([positives, negatives]), labels, grid)
        a, b = descent.params[0]
        params = params.replace(class_id, a=a, b=b)
        initial_loss += descent.initial_loss
        final_loss += descent.final_loss
        for step in descent.trace:
            trace.append(replace(step, class_id=class_id))
        logger.info("Class %d Platt parameters: a=%g, b=%g", class_id, a, b)

    return CalibrationResult(
        params=params,
        trace=trace,
        method="platt",
        initial_loss=initial_loss,
        final_loss=final_loss,
    )


def _sample_scores(scores: Sequence[ScoreMatrix], refs, class_id: int) -> np.ndarray:
    values = [
        scores[ref.image_id][ref.region_id, class_id]
        for ref in refs
        if ref.region_id is not None
    ]
    return np.array(values, dtype=np.float64)
