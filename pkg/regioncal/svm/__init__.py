"""One-vs-all linear classifiers over region features."""

from .io import load_models, save_models
from .samples import ClassSamples, TrainingSet, assemble_training_set_fs, build_training_set
from .scoring import score_all
from .training import (
    LinearModel,
    MiningConfig,
    mine_hard_negatives,
    objective,
    objective_gradient,
    train,
    train_all,
)

__all__ = [
    "ClassSamples",
    "LinearModel",
    "MiningConfig",
    "TrainingSet",
    "assemble_training_set_fs",
    "build_training_set",
    "load_models",
    "mine_hard_negatives",
    "objective",
    "objective_gradient",
    "save_models",
    "score_all",
    "train",
    "train_all",
]
