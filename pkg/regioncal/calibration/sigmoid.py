"""The per-class sigmoid that maps raw SVM scores onto a comparable scale.

The calibrated score of class ``c`` is ``1 / (1 + exp(a_c * score + b_c))``.
With ``a_c < 0`` this is strictly increasing in the score. When all classes share
the same ``(a, b)`` the labeling equals the labeling by raw scores, so only the
relative offsets between classes change the outcome.

Labelings compare the logarithm of the calibrated score. It orders the regions the same,
but doesn't round to 1.0 for high scores, so equal parameters keep the raw-score order.

Untrainable classes have a raw score of ``-inf``. These keep a calibrated score of
``-inf``, so they never win the argmax (not even against a saturated zero).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from regioncal.exceptions import DimensionMismatch, InvalidParameterValue
from regioncal.types import ClassId, ScoreMatrix

__all__ = [
    "CalibrationParams",
    "GridSpec",
    "sigmoid",
    "calibrate_column",
    "calibrate_scores",
    "rank_column",
    "rank_scores",
]


@dataclass(frozen=True)
class CalibrationParams:
    """The ``(a_c, b_c)`` pair of every class."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        self.__dict__["a"] = tuple(float(value) for value in self.a)
        self.__dict__["b"] = tuple(float(value) for value in self.b)
        if len(self.a) != len(self.b):
            raise DimensionMismatch(
                "params", f"Got {len(self.a)} slopes but {len(self.b)} offsets."
            )
        if not all(np.isfinite(self.a)) or not all(np.isfinite(self.b)):
            raise InvalidParameterValue("params", "Calibration parameters must be finite.")

    @classmethod
    def constant(cls, class_count: int, a: float = -7.0, b: float = 0.0) -> CalibrationParams:
        return cls(a=(a,) * class_count, b=(b,) * class_count)

    @property
    def class_count(self) -> int:
        return len(self.a)

    def __getitem__(self, class_id: ClassId) -> tuple[float, float]:
        return self.a[class_id], self.b[class_id]

    def replace(
        self, class_id: ClassId, a: Optional[float] = None, b: Optional[float] = None
    ) -> CalibrationParams:
        """Return a copy where the parameters of a single class are changed."""
        new_a = list(self.a)
        new_b = list(self.b)
        if a is not None:
            new_a[class_id] = a
        if b is not None:
            new_b[class_id] = b
        return CalibrationParams(a=tuple(new_a), b=tuple(new_b))

    def as_list(self) -> list[dict]:
        return [
            {"class_id": class_id, "a": a, "b": b}
            for class_id, (a, b) in enumerate(zip(self.a, self.b))
        ]


@dataclass(frozen=True)
class GridSpec:
    """The line search grid of the coordinate descent, and the starting point."""

    a_range: tuple[float, float] = (-12.0, -2.0)
    b_range: tuple[float, float] = (-10.0, 10.0)

    #: Number of equally spaced values per line, including both endpoints.
    points: int = 10

    init_a: float = -7.0
    init_b: float = 0.0

    def validate(self):
        if self.points < 2:
            raise InvalidParameterValue("grid_points", "The grid needs at least 2 points.")
        for name, (low, high), init in (
            ("a", self.a_range, self.init_a),
            ("b", self.b_range, self.init_b),
        ):
            if not low < high:
                raise InvalidParameterValue(
                    f"{name}_range", f"The {name} range should be increasing, got [{low}, {high}]."
                )
            if not low <= init <= high:
                raise InvalidParameterValue(
                    f"init_{name}",
                    f"The initial {name} ({init}) is outside the grid [{low}, {high}].",
                )

    @property
    def a_values(self) -> np.ndarray:
        return np.linspace(self.a_range[0], self.a_range[1], self.points)

    @property
    def b_values(self) -> np.ndarray:
        return np.linspace(self.b_range[0], self.b_range[1], self.points)

    def initial_params(self, class_count: int) -> CalibrationParams:
        return CalibrationParams.constant(class_count, a=self.init_a, b=self.init_b)

    def as_dict(self) -> dict:
        return {
            "a_range": list(self.a_range),
            "b_range": list(self.b_range),
            "points": self.points,
            "init_a": self.init_a,
            "init_b": self.init_b,
        }


def sigmoid(score, a: float, b: float):
    """The calibrated score ``1 / (1 + exp(a * score + b))``, for scalars or arrays.

    This saturates to 0 or 1 for large ``|a * score + b|`` without overflow warnings.
    """
    return expit(-(np.multiply(a, score) + b))


def calibrate_column(column: np.ndarray, a: float, b: float) -> np.ndarray:
    """Calibrate the raw scores of a single class."""
    with np.errstate(invalid="ignore", over="ignore"):
        calibrated = expit(-(column * a + b))
    return np.where(np.isneginf(column), -np.inf, calibrated)


def rank_column(column: np.ndarray, a: float, b: float) -> np.ndarray:
    """The logarithm of the calibrated scores of a single class.

    This orders regions like :func:`calibrate_column`, but stays strictly increasing
    where the sigmoid itself already rounds to 1.0.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        ranked = -np.logaddexp(0.0, column * a + b)
    return np.where(np.isneginf(column), -np.inf, ranked)


def calibrate_scores(scores: ScoreMatrix, params: CalibrationParams) -> np.ndarray:
    """Calibrate a ``(R, C)`` score matrix, column by column.

    The result is bit-identical to stacking :func:`calibrate_column` results.
    """
    return _apply_columns(calibrate_column, scores, params)


def rank_scores(scores: ScoreMatrix, params: CalibrationParams) -> np.ndarray:
    """The ``(R, C)`` matrix of :func:`rank_column` values, which the labelers compare.

    The result is bit-identical to stacking :func:`rank_column` results,
    which the cached loss evaluation depends on.
    """
    return _apply_columns(rank_column, scores, params)


def _apply_columns(func, scores: ScoreMatrix, params: CalibrationParams) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != params.class_count:
        raise DimensionMismatch(
            "scores",
            f"Score matrix of shape {scores.shape} doesn't match"
            f" {params.class_count} calibrated classes.",
        )
    if not params.class_count:
        return np.zeros((scores.shape[0], 0))
    return np.column_stack([func(scores[:, c], *params[c]) for c in range(params.class_count)])
