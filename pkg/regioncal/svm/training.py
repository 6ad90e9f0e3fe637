"""Linear one-vs-all classifiers.

Each class has a linear SVM, trained in the primal on the squared hinge loss::

    reg * 1/2 * |w|^2 + sum_s weight_s * max(0, 1 - y_s * w . x_s)^2

The features get a constant 1 appended, so the last weight is the bias
(which is regularized as well). The sample weights balance the classes:
positives weigh ``N / (2 * N+)`` and negatives ``N / (2 * N-)``, so both
sides have the same total weight.

The squared hinge loss is differentiable, so the objective is minimized with
L-BFGS-B. When there are many negatives, the classifier is first trained on
a working set, and hard-negative mining adds all negatives that violate the
margin until the working set no longer changes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from regioncal import conf
from regioncal.datasets import Dataset
from regioncal.datasets.base import stack_features
from regioncal.exceptions import InvalidParameterValue, TrainingFailed
from regioncal.parallel import parallel_map
from regioncal.types import ClassId

from .samples import ClassSamples, TrainingSet

logger = logging.getLogger(__name__)

__all__ = [
    "LinearModel",
    "MiningConfig",
    "FitResult",
    "augment",
    "sample_weights",
    "objective",
    "objective_gradient",
    "fit_linear_svm",
    "mine_hard_negatives",
    "train",
    "train_all",
]


@dataclass(frozen=True, eq=False)
class LinearModel:
    """The classifier of a single class.

    An untrainable class (no positives or negatives) has no weights,
    and scores ``-inf`` on every region.
    """

    class_id: ClassId

    #: The ``D + 1`` weights, the last one is the bias.
    weights: Optional[np.ndarray]

    #: Objective value after every optimizer iteration (of the final fit).
    history: tuple[float, ...] = field(default=(), repr=False)
    mining_rounds: int = 0

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        if self.class_id != other.class_id:
            return False
        if self.weights is None or other.weights is None:
            return self.weights is None and other.weights is None
        return np.array_equal(self.weights, other.weights)

    @property
    def trainable(self) -> bool:
        return self.weights is not None

    @property
    def feature_dim(self) -> Optional[int]:
        return None if self.weights is None else len(self.weights) - 1

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        """Raw scores ``w . [x, 1]`` of a ``(N, D)`` feature matrix."""
        if self.weights is None:
            return np.full(len(features), -np.inf)
        return features @ self.weights[:-1] + self.weights[-1]


@dataclass(frozen=True)
class MiningConfig:
    #: Number of negatives that are scored at once, and the size of the first working set.
    batch_size: int = 5000

    #: Negatives scoring above ``-1 + threshold`` are added to the working set.
    threshold: float = 0.0

    max_rounds: int = 50
    enabled: bool = True

    @classmethod
    def from_settings(cls, **overrides) -> MiningConfig:
        values = {
            "batch_size": conf.REGIONCAL_MINING_BATCH_SIZE,
            "threshold": conf.REGIONCAL_MINING_THRESHOLD,
            "max_rounds": conf.REGIONCAL_MINING_MAX_ROUNDS,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def validate(self):
        if self.batch_size < 1:
            raise InvalidParameterValue("mining_batch_size", "The batch size should be positive.")
        if self.max_rounds < 1:
            raise InvalidParameterValue("mining_max_rounds", "At least one round is required.")


@dataclass
class FitResult:
    weights: np.ndarray
    history: list[float]
    iterations: int
    converged: bool
    message: str = ""


def augment(features: np.ndarray) -> np.ndarray:
    """Append the constant 1 feature for the bias."""
    features = np.asarray(features, dtype=np.float64)
    return np.hstack([features, np.ones((len(features), 1))])


def sample_weights(labels: np.ndarray, n_positive=None, n_negative=None) -> np.ndarray:
    """The inverse-frequency weights of the samples.

    The counts default to those in ``labels``. Hard-negative mining passes the
    size of the full negative pool, so the weights don't depend on the working set.
    """
    labels = np.asarray(labels)
    if n_positive is None:
        n_positive = int((labels > 0).sum())
    if n_negative is None:
        n_negative = int((labels < 0).sum())
    total = n_positive + n_negative
    return np.where(labels > 0, total / (2.0 * n_positive), total / (2.0 * n_negative))


def _margins(weights, samples, labels):
    return 1.0 - labels * (samples @ weights)


def objective(weights, samples: np.ndarray, labels: np.ndarray, sample_weights, reg: float):
    """The training objective.

    :param weights: The weight vector, or a :class:`LinearModel`.
    :param samples: The augmented ``(N, D + 1)`` feature matrix.
    :param labels: +1 or -1 per sample.
    """
    if isinstance(weights, LinearModel):
        weights = weights.weights
    hinge = np.maximum(0.0, _margins(weights, samples, labels))
    return float(0.5 * reg * (weights @ weights) + np.sum(sample_weights * hinge**2))


def objective_gradient(weights, samples, labels, sample_weights, reg: float) -> np.ndarray:
    hinge = np.maximum(0.0, _margins(weights, samples, labels))
    return reg * weights - 2.0 * (samples.T @ (sample_weights * labels * hinge))


def fit_linear_svm(
    samples: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray,
    reg: float,
    initial: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> FitResult:
    """Minimize the objective with L-BFGS-B.

    The line search of L-BFGS-B only accepts points with sufficient decrease,
    so the recorded objective history is non-increasing.
    """
    tolerance = conf.REGIONCAL_SVM_TOLERANCE if tolerance is None else tolerance
    max_iter = conf.REGIONCAL_SVM_MAX_ITER if max_iter is None else max_iter
    if initial is None:
        initial = np.zeros(samples.shape[1])

    def _fun(weights):
        hinge = np.maximum(0.0, _margins(weights, samples, labels))
        value = 0.5 * reg * (weights @ weights) + np.sum(sample_weights * hinge**2)
        gradient = reg * weights - 2.0 * (samples.T @ (sample_weights * labels * hinge))
        return value, gradient

    history = [objective(initial, samples, labels, sample_weights, reg)]

    def _callback(weights):
        history.append(objective(weights, samples, labels, sample_weights, reg))

    result = minimize(
        _fun,
        initial,
        jac=True,
        method="L-BFGS-B",
        callback=_callback,
        options={"maxiter": max_iter, "gtol": tolerance, "ftol": tolerance},
    )
    if not np.isfinite(result.x).all():
        raise TrainingFailed("svm", f"The optimizer diverged: {result.message}")

    return FitResult(
        weights=result.x,
        history=history,
        iterations=int(result.nit),
        converged=bool(result.success),
        message=str(result.message),
    )


def mine_hard_negatives(
    weights: np.ndarray,
    negative_pool: np.ndarray,
    batch_size: int,
    threshold: float = 0.0,
    working_set: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Scan the negative pool for margin violators.

    :param weights: The weights of the interim model.
    :param negative_pool: The augmented features of all negatives.
    :param working_set: Indices into the pool of the current working set.
    :returns: The sorted indices of the new working set.
    """
    if isinstance(weights, LinearModel):
        weights = weights.weights
    found = [] if working_set is None else [np.asarray(working_set, dtype=np.intp)]
    for start in range(0, len(negative_pool), batch_size):
        scores = negative_pool[start : start + batch_size] @ weights
        found.append(np.flatnonzero(scores > -1.0 + threshold) + start)

    if not found:
        return np.zeros(0, dtype=np.intp)
    return np.unique(np.concatenate(found)).astype(np.intp)


def train(
    positives: np.ndarray,
    negatives: np.ndarray,
    reg: Optional[float] = None,
    mining: Optional[MiningConfig] = None,
    class_id: ClassId = 0,
) -> LinearModel:
    """Train the classifier of a single class.

    :param positives: The ``(N+, D)`` features of the positive samples.
    :param negatives: The ``(N-, D)`` features of the full negative pool.
    """
    reg = conf.REGIONCAL_REG_STRENGTH if reg is None else reg
    mining = mining or MiningConfig.from_settings()
    mining.validate()
    if not len(positives) or not len(negatives):
        raise TrainingFailed(
            f"class {class_id}", "Training needs at least one positive and one negative sample."
        )
    if not (np.isfinite(positives).all() and np.isfinite(negatives).all()):
        raise TrainingFailed(f"class {class_id}", "The features contain non-finite values.")

    positives = augment(positives)
    negative_pool = augment(negatives)
    n_positive = len(positives)
    n_negative = len(negative_pool)

    def _fit(working_set, initial=None):
        samples = np.vstack([positives, negative_pool[working_set]])
        labels = np.concatenate([np.ones(n_positive), -np.ones(len(working_set))])
        weights = sample_weights(labels, n_positive=n_positive, n_negative=n_negative)
        return fit_linear_svm(samples, labels, weights, reg, initial=initial)

    if not mining.enabled:
        fit = _fit(np.arange(n_negative))
        return LinearModel(class_id, fit.weights, history=tuple(fit.history))

    working_set = np.arange(min(mining.batch_size, n_negative))
    fit = _fit(working_set)
    rounds = 0
    while rounds < mining.max_rounds:
        new_working_set = mine_hard_negatives(
            fit.weights, negative_pool, mining.batch_size, mining.threshold, working_set
        )
        if len(new_working_set) == len(working_set):
            break

        rounds += 1
        logger.debug(
            "Class %d mining round %d: working set grew from %d to %d negatives",
            class_id,
            rounds,
            len(working_set),
            len(new_working_set),
        )
        working_set = new_working_set
        fit = _fit(working_set, initial=fit.weights)
    else:
        logger.warning("Class %d: hard-negative mining stopped after %d rounds", class_id, rounds)

    return LinearModel(class_id, fit.weights, history=tuple(fit.history), mining_rounds=rounds)


def train_all(
    dataset: Dataset,
    training_set: TrainingSet,
    reg: Optional[float] = None,
    mining: Optional[MiningConfig] = None,
    jobs: int = 1,
) -> list[LinearModel]:
    """Train the classifiers of all classes, in parallel."""
    mining = mining or MiningConfig.from_settings()

    def _train(samples: ClassSamples) -> LinearModel:
        if not samples.trainable:
            return LinearModel(samples.class_id, None)
        model = train(
            stack_features(dataset, samples.positives, samples.class_id),
            stack_features(dataset, samples.negatives, samples.class_id),
            reg=reg,
            mining=mining,
            class_id=samples.class_id,
        )
        logger.info(
            "Trained class %d on %d positives and %d negatives (%d mining rounds)",
            samples.class_id,
            len(samples.positives),
            len(samples.negatives),
            model.mining_rounds,
        )
        return model

    models = parallel_map(_train, list(training_set), jobs=jobs)
    for model in models:
        if not model.trainable:
            logger.warning("Class %d is untrainable, it will never be predicted.", model.class_id)
    return models
