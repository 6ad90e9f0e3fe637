"""The losses that joint calibration minimizes.

Both losses are computed from the superpixel labeling only.
The pixel-level ground truth is stored as a class histogram per superpixel,
so the number of correctly labeled pixels of a superpixel is a single table lookup.

The fully supervised loss is one minus the class-average pixel accuracy.
Classes without any ground-truth pixels are left out of the average.

The weakly supervised loss compares the set of classes that occur in the labeling
of an image with the image labels. Each mismatch of class ``c`` counts
``1 / I_c``, where ``I_c`` is the number of images that have label ``c``.
Classes that occur in no image are left out.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from lru import LRU

from regioncal import conf
from regioncal.datasets import Dataset
from regioncal.exceptions import DimensionMismatch, UndefinedRatio, UnsupportedSupervision
from regioncal.forest import label_image_fast, propagate_max
from regioncal.parallel import parallel_map
from regioncal.types import ClassId, Labeling, LossKind, ScoreMatrix

from .sigmoid import CalibrationParams, rank_column

logger = logging.getLogger(__name__)

__all__ = [
    "LookupTables",
    "fs_loss",
    "ws_loss",
    "fs_class_accuracies",
    "ws_class_mismatches",
    "output_label_matrix",
    "LossEvaluator",
    "column_cache_size",
    "evaluate_loss",
    "label_dataset",
]


@dataclass(frozen=True)
class LookupTables:
    """The ground truth of a dataset, precomputed once for fast loss evaluation."""

    class_count: int

    #: Per image, the ``(S, C)`` ground-truth pixel counts (empty for weak datasets).
    histograms: tuple[np.ndarray, ...]

    #: Boolean ``(I, C)`` matrix of image labels.
    label_matrix: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> LookupTables:
        return cls(
            class_count=dataset.class_count,
            histograms=dataset.histograms if dataset.is_fully_supervised else (),
            label_matrix=dataset.label_matrix,
        )

    @property
    def class_pixels(self) -> np.ndarray:
        """Total ground-truth pixels per class (``P_c``)."""
        totals = np.zeros(self.class_count, dtype=np.int64)
        for histogram in self.histograms:
            totals += histogram.sum(axis=0)
        return totals

    @property
    def image_label_counts(self) -> np.ndarray:
        """Number of images per class label (``I_c``)."""
        return self.label_matrix.sum(axis=0)


def _tables(data) -> LookupTables:
    if isinstance(data, LookupTables):
        return data
    return LookupTables.from_dataset(data)


def _check_labelings(labelings: Sequence[Labeling], tables: LookupTables, need_histograms):
    if len(labelings) != len(tables.label_matrix):
        raise DimensionMismatch(
            "labelings",
            f"Got {len(labelings)} labelings for {len(tables.label_matrix)} images.",
        )
    if need_histograms:
        for image_id, (labels, histogram) in enumerate(zip(labelings, tables.histograms)):
            if len(labels) != len(histogram):
                raise DimensionMismatch(
                    "labelings",
                    f"Labeling of image {image_id} has {len(labels)} superpixels,"
                    f" expected {len(histogram)}.",
                )


def fs_correct_pixels(labelings: Sequence[Labeling], tables: LookupTables) -> np.ndarray:
    """Per class, the number of pixels that received their ground-truth class."""
    correct = np.zeros(tables.class_count, dtype=np.float64)
    for labels, histogram in zip(labelings, tables.histograms):
        labels = np.asarray(labels, dtype=np.intp)
        # Pixels of superpixel s are correct when their class equals the label of s.
        hits = histogram[np.arange(len(labels)), labels]
        correct += np.bincount(labels, weights=hits, minlength=tables.class_count)
    return correct


def fs_class_accuracies(labelings: Sequence[Labeling], data) -> tuple[np.ndarray, np.ndarray]:
    """The pixel accuracy of every class, and the mask of classes that have pixels."""
    if isinstance(data, Dataset):
        data.require_full_supervision("fs_loss")
    tables = _tables(data)
    if not tables.histograms and len(tables.label_matrix):
        raise UnsupportedSupervision("fs_loss")
    _check_labelings(labelings, tables, need_histograms=True)

    pixels = tables.class_pixels
    present = pixels > 0
    if not present.any():
        raise UndefinedRatio(
            "fs_loss", "No class has ground-truth pixels, the class-average is undefined."
        )

    correct = fs_correct_pixels(labelings, tables)
    accuracies = np.zeros(tables.class_count, dtype=np.float64)
    accuracies[present] = correct[present] / pixels[present]
    return accuracies, present


def fs_loss(labelings: Sequence[Labeling], data) -> float:
    """One minus the class-average pixel accuracy.

    :param data: The :class:`~regioncal.datasets.Dataset` or its :class:`LookupTables`.
    """
    accuracies, present = fs_class_accuracies(labelings, data)
    return float(1.0 - accuracies[present].mean())


def output_label_matrix(labelings: Sequence[Labeling], class_count: int) -> np.ndarray:
    """Boolean ``(I, C)`` matrix of the classes that occur in each labeling."""
    matrix = np.zeros((len(labelings), class_count), dtype=bool)
    for image_index, labels in enumerate(labelings):
        matrix[image_index, np.asarray(labels, dtype=np.intp)] = True
    return matrix


def ws_class_mismatches(labelings: Sequence[Labeling], data) -> np.ndarray:
    """Per class, the number of images where the output and image label disagree."""
    tables = _tables(data)
    _check_labelings(labelings, tables, need_histograms=False)
    output = output_label_matrix(labelings, tables.class_count)
    return (output != tables.label_matrix).sum(axis=0)


def ws_loss(labelings: Sequence[Labeling], data) -> float:
    """The Hamming distance between output and image label sets, inverse-frequency weighted."""
    tables = _tables(data)
    mismatches = ws_class_mismatches(labelings, tables)
    counts = tables.image_label_counts
    present = counts > 0
    return float((mismatches[present] / counts[present]).sum())


def column_cache_size(class_count: int, grid_points: int = 0) -> int:
    """The size of the calibrated-column cache.

    Without a ``REGIONCAL_COLUMN_CACHE_SIZE`` setting, this holds the current and
    previous column of every class, and all columns of a single line search.
    """
    return conf.REGIONCAL_COLUMN_CACHE_SIZE or 2 * class_count + grid_points


class LossEvaluator:
    """Evaluates the calibration loss for many parameter sets.

    The raw scores are fixed, so only the sigmoid is reapplied for every evaluation.
    A line search only changes a single class, so the calibrated columns of all
    other classes are taken from a cache.
    """

    def __init__(
        self,
        dataset: Dataset,
        scores: Sequence[ScoreMatrix],
        kind: LossKind,
        jobs: int = 1,
        cache_size: Optional[int] = None,
    ):
        if kind is LossKind.FULLY_SUPERVISED:
            dataset.require_full_supervision("fs_loss")
        if len(scores) != len(dataset.images):
            raise DimensionMismatch(
                "scores", f"Got {len(scores)} score matrices for {len(dataset.images)} images."
            )

        self.kind = kind
        self.class_count = dataset.class_count
        self.forests = [image.forest for image in dataset.images]
        self.scores = []
        for image, matrix in zip(dataset.images, scores):
            matrix = np.asarray(matrix, dtype=np.float64)
            if matrix.shape != (image.region_count, dataset.class_count):
                raise DimensionMismatch(
                    "scores",
                    f"Score matrix of image {image.id} has shape {matrix.shape},"
                    f" expected ({image.region_count}, {dataset.class_count}).",
                )
            self.scores.append(matrix)

        self.tables = LookupTables.from_dataset(dataset)
        self.jobs = jobs
        self._columns = LRU(cache_size or column_cache_size(self.class_count))
        self.evaluations = 0

    def calibrated_columns(self, class_id: ClassId, a: float, b: float) -> tuple[np.ndarray, ...]:
        """The log calibrated scores of a class, for every image."""
        key = (class_id, a, b)
        try:
            return self._columns[key]
        except KeyError:
            columns = tuple(rank_column(m[:, class_id], a, b) for m in self.scores)
            self._columns[key] = columns
            return columns

    def label_all(self, params: CalibrationParams) -> list[Labeling]:
        if params.class_count != self.class_count:
            raise DimensionMismatch(
                "params",
                f"Got {params.class_count} calibrated classes, expected {self.class_count}.",
            )
        columns = [self.calibrated_columns(c, *params[c]) for c in range(self.class_count)]

        def _label(image_index):
            calibrated = np.column_stack([class_columns[image_index] for class_columns in columns])
            return propagate_max(self.forests[image_index], calibrated)[0]

        return parallel_map(_label, range(len(self.forests)), jobs=self.jobs)

    def loss(self, labelings: Sequence[Labeling]) -> float:
        if self.kind is LossKind.FULLY_SUPERVISED:
            return fs_loss(labelings, self.tables)
        else:
            return ws_loss(labelings, self.tables)

    def __call__(self, params: CalibrationParams) -> float:
        self.evaluations += 1
        return self.loss(self.label_all(params))


def evaluate_loss(
    dataset: Dataset,
    scores: Sequence[ScoreMatrix],
    params: CalibrationParams,
    kind: LossKind,
    jobs: int = 1,
) -> float:
    """Label all images with the given calibration, and return the loss."""
    return LossEvaluator(dataset, scores, kind, jobs=jobs)(params)


def label_dataset(
    dataset: Dataset,
    scores: Sequence[ScoreMatrix],
    params: CalibrationParams,
    jobs: int = 1,
) -> list[Labeling]:
    """Label every image of the dataset with :func:`~regioncal.forest.label_image_fast`."""
    if len(scores) != len(dataset.images):
        raise DimensionMismatch(
            "scores", f"Got {len(scores)} score matrices for {len(dataset.images)} images."
        )
    return parallel_map(
        lambda pair: label_image_fast(pair[0].forest, pair[1], params),
        list(zip(dataset.images, scores)),
        jobs=jobs,
    )
