from __future__ import annotations

from typing import Sequence

import numpy as np

from regioncal.datasets import Dataset
from regioncal.exceptions import DimensionMismatch
from regioncal.parallel import parallel_map
from regioncal.types import ScoreMatrix

from .training import LinearModel


def weight_matrix(models: Sequence[LinearModel], class_count: int, feature_dim: int):
    """Stack the weights as ``(D + 1, C)`` matrix, and tell which classes are untrainable."""
    if [model.class_id for model in models] != list(range(class_count)):
        raise DimensionMismatch(
            "models",
            f"Expected one model for each of the {class_count} classes,"
            f" got class ids {[model.class_id for model in models]}.",
        )

    matrix = np.zeros((feature_dim + 1, class_count))
    untrainable = np.zeros(class_count, dtype=bool)
    for model in models:
        if not model.trainable:
            untrainable[model.class_id] = True
        elif model.feature_dim != feature_dim:
            raise DimensionMismatch(
                "models",
                f"Model of class {model.class_id} has {model.feature_dim} features,"
                f" the dataset has {feature_dim}.",
            )
        else:
            matrix[:, model.class_id] = model.weights
    return matrix, untrainable


def score_image(features: np.ndarray, weights: np.ndarray, untrainable: np.ndarray):
    scores = features @ weights[:-1] + weights[-1]
    scores[:, untrainable] = -np.inf
    return scores


def score_all(
    models: Sequence[LinearModel], dataset: Dataset, jobs: int = 1
) -> list[ScoreMatrix]:
    """The raw ``(R, C)`` score matrix of every image."""
    weights, untrainable = weight_matrix(models, dataset.class_count, dataset.feature_dim)
    return parallel_map(
        lambda image: score_image(image.region_features, weights, untrainable),
        dataset.images,
        jobs=jobs,
    )
