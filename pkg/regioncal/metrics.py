"""Evaluation of labelings.

The main measure is the class-average pixel accuracy, which is exactly
one minus the fully supervised calibration loss. The global pixel accuracy
and the confusion matrix are reported as well.

For weakly supervised data only the image labels can be compared,
this gives the image-level precision and recall of every class.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from regioncal.calibration.losses import (
    LookupTables,
    fs_class_accuracies,
    fs_loss,
    output_label_matrix,
    ws_loss,
)
from regioncal.datasets import Dataset
from regioncal.types import Labeling

__all__ = ["EvalReport", "WeakEvalReport", "evaluate", "evaluate_weak", "confusion_matrix"]


@dataclass(frozen=True, eq=False)
class EvalReport:
    class_count: int

    #: Pixel accuracy per class, ``None`` for classes without ground-truth pixels.
    class_accuracies: tuple[Optional[float], ...]
    class_average_accuracy: float
    global_accuracy: float

    #: Ground-truth pixels per class (the confusion matrix row sums).
    class_pixels: tuple[int, ...]

    #: Pixel counts, rows are the ground-truth classes and columns the predicted classes.
    confusion: np.ndarray

    @property
    def loss(self) -> float:
        return 1.0 - self.class_average_accuracy

    def as_dict(self) -> dict:
        return {
            "kind": "full",
            "class_count": self.class_count,
            "class_average_accuracy": self.class_average_accuracy,
            "global_accuracy": self.global_accuracy,
            "classes": [
                {"class_id": class_id, "accuracy": accuracy, "pixels": pixels}
                for class_id, (accuracy, pixels) in enumerate(
                    zip(self.class_accuracies, self.class_pixels)
                )
            ],
            "confusion": self.confusion.tolist(),
        }


@dataclass(frozen=True)
class WeakEvalReport:
    class_count: int

    #: Image-level precision and recall per class, ``None`` when undefined.
    precision: tuple[Optional[float], ...]
    recall: tuple[Optional[float], ...]

    true_positives: tuple[int, ...]
    false_positives: tuple[int, ...]
    false_negatives: tuple[int, ...]

    #: The inverse-frequency weighted Hamming distance (the weakly supervised loss).
    hamming_loss: float

    def as_dict(self) -> dict:
        return {
            "kind": "weak",
            "class_count": self.class_count,
            "hamming_loss": self.hamming_loss,
            "classes": [
                {
                    "class_id": class_id,
                    "precision": self.precision[class_id],
                    "recall": self.recall[class_id],
                    "true_positives": self.true_positives[class_id],
                    "false_positives": self.false_positives[class_id],
                    "false_negatives": self.false_negatives[class_id],
                }
                for class_id in range(self.class_count)
            ],
        }


def confusion_matrix(labelings: Sequence[Labeling], tables: LookupTables) -> np.ndarray:
    """Pixel-level confusion matrix, computed from the superpixel histograms."""
    class_count = tables.class_count
    counts = np.zeros(class_count * class_count, dtype=np.float64)
    ground_truth = np.arange(class_count)
    for labels, histogram in zip(labelings, tables.histograms):
        labels = np.asarray(labels, dtype=np.intp)
        # All pixels of a superpixel get its label, whatever their ground-truth class.
        cells = class_count * ground_truth[None, :] + labels[:, None]
        counts += np.bincount(cells.ravel(), weights=histogram.ravel(), minlength=counts.size)
    return counts.reshape(class_count, class_count).astype(np.int64)


def evaluate(labelings: Sequence[Labeling], dataset: Dataset) -> EvalReport:
    """Evaluate the labelings against the pixel-level ground truth."""
    dataset.require_full_supervision("evaluate")
    tables = LookupTables.from_dataset(dataset)
    accuracies, present = fs_class_accuracies(labelings, tables)
    confusion = confusion_matrix(labelings, tables)
    total = int(confusion.sum())

    return EvalReport(
        class_count=dataset.class_count,
        class_accuracies=tuple(
            float(accuracy) if has_pixels else None
            for accuracy, has_pixels in zip(accuracies, present)
        ),
        class_average_accuracy=1.0 - fs_loss(labelings, tables),
        global_accuracy=float(np.trace(confusion) / total) if total else 0.0,
        class_pixels=tuple(int(count) for count in tables.class_pixels),
        confusion=confusion,
    )


def evaluate_weak(labelings: Sequence[Labeling], dataset: Dataset) -> WeakEvalReport:
    """Compare the classes present in each labeling with the image labels."""
    tables = LookupTables.from_dataset(dataset)
    output = output_label_matrix(labelings, dataset.class_count)
    expected = tables.label_matrix

    true_positives = (output & expected).sum(axis=0)
    false_positives = (output & ~expected).sum(axis=0)
    false_negatives = (~output & expected).sum(axis=0)

    return WeakEvalReport(
        class_count=dataset.class_count,
        precision=_ratios(true_positives, true_positives + false_positives),
        recall=_ratios(true_positives, true_positives + false_negatives),
        true_positives=tuple(map(int, true_positives)),
        false_positives=tuple(map(int, false_positives)),
        false_negatives=tuple(map(int, false_negatives)),
        hamming_loss=ws_loss(labelings, tables),
    )


def _ratios(numerators, denominators) -> tuple[Optional[float], ...]:
    return tuple(
        float(n / d) if d else None for n, d in zip(numerators.tolist(), denominators.tolist())
    )
