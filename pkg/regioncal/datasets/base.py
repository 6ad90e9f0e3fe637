"""The dataset model.

Pixels are never stored individually. The atomic unit is the :class:`Superpixel`,
which holds its pixel count and (in fully supervised datasets) the histogram of
ground-truth classes of its pixels. All pixel-level measures are computed from these
histograms, as every pixel of a superpixel receives the same output label.

A ground-truth region of class ``c`` is the set of all superpixels of an image
whose majority label is ``c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Collection, Iterable, Mapping, Optional

import numpy as np
from django.utils.functional import cached_property

from regioncal.exceptions import UndefinedRatio, UnknownSuperpixel, UnsupportedSupervision
from regioncal.forest import RegionForest, validate_forest
from regioncal.types import ClassId, ImageId, RegionId, SuperpixelId, Supervision

__all__ = [
    "Superpixel",
    "ImageRecord",
    "Dataset",
    "iou",
    "class_pixel_counts",
    "to_weak",
    "validate_image",
]


@dataclass(frozen=True)
class Superpixel:
    id: SuperpixelId
    pixel_count: int
    gt_histogram: Mapping[ClassId, int] = field(default_factory=dict)

    @property
    def majority_class(self) -> Optional[ClassId]:
        """The most frequent ground-truth class (lowest id on ties)."""
        if not self.gt_histogram:
            return None
        return min(self.gt_histogram, key=lambda c: (-self.gt_histogram[c], c))


@dataclass(frozen=True, eq=False)
class ImageRecord:
    """A single image: its superpixels, region proposals and their features."""

    id: ImageId
    superpixels: tuple[Superpixel, ...]
    forest: RegionForest

    #: Feature vectors of all regions, shape ``(R, D)``.
    region_features: np.ndarray

    #: The image-level labels (the only ground truth in weakly supervised datasets).
    image_labels: frozenset[ClassId]

    #: Features of the ground-truth regions, by class (fully supervised datasets only).
    gt_region_features: Mapping[ClassId, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.__dict__["superpixels"] = tuple(self.superpixels)
        self.__dict__["image_labels"] = frozenset(self.image_labels)

    def __eq__(self, other):
        if not isinstance(other, ImageRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.superpixels == other.superpixels
            and self.forest == other.forest
            and self.image_labels == other.image_labels
            and _arrays_equal(self.region_features, other.region_features)
            and self.gt_region_features.keys() == other.gt_region_features.keys()
            and all(
                _arrays_equal(value, other.gt_region_features[key])
                for key, value in self.gt_region_features.items()
            )
        )

    @property
    def area(self) -> int:
        return sum(sp.pixel_count for sp in self.superpixels)

    @property
    def region_count(self) -> int:
        return self.forest.region_count

    @cached_property
    def pixel_counts(self) -> np.ndarray:
        """Pixel count of every superpixel (index = SuperpixelId)."""
        return np.array([sp.pixel_count for sp in self.superpixels], dtype=np.int64)

    def histogram_matrix(self, class_count: int) -> np.ndarray:
        """The ground-truth histograms as dense ``(S, C)`` matrix."""
        matrix = np.zeros((len(self.superpixels), class_count), dtype=np.int64)
        for sp in self.superpixels:
            for class_id, count in sp.gt_histogram.items():
                matrix[sp.id, class_id] = count
        return matrix

    def region_histogram(self, region_id: RegionId, class_count: int) -> np.ndarray:
        """Ground-truth pixel counts per class inside a region."""
        histogram = np.zeros(class_count, dtype=np.int64)
        for superpixel_id in self.forest.superpixel_sets[region_id]:
            for class_id, count in self.superpixels[superpixel_id].gt_histogram.items():
                histogram[class_id] += count
        return histogram

    def region_majority_class(self, region_id: RegionId, class_count: int) -> ClassId:
        # argmax takes the first maximum: lowest class id on ties
        return int(self.region_histogram(region_id, class_count).argmax())

    def ground_truth_regions(self) -> dict[ClassId, frozenset[SuperpixelId]]:
        """Group the superpixels by their majority label."""
        groups = {}
        for sp in self.superpixels:
            class_id = sp.majority_class
            if class_id is not None:
                groups.setdefault(class_id, set()).add(sp.id)
        return {class_id: frozenset(members) for class_id, members in sorted(groups.items())}


@dataclass(frozen=True, eq=False)
class Dataset:
    class_count: int
    feature_dim: int
    images: tuple[ImageRecord, ...]
    supervision: Supervision = Supervision.FULL

    def __post_init__(self):
        self.__dict__["images"] = tuple(self.images)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.feature_dim == other.feature_dim
            and self.supervision == other.supervision
            and self.images == other.images
        )

    def __len__(self):
        return len(self.images)

    @property
    def is_fully_supervised(self) -> bool:
        return self.supervision is Supervision.FULL

    def require_full_supervision(self, operation: str):
        if not self.is_fully_supervised:
            raise UnsupportedSupervision(
                operation,
                f"'{operation}' needs pixel-level ground truth, got a {self.supervision} dataset.",
            )

    @cached_property
    def histograms(self) -> tuple[np.ndarray, ...]:
        """The ``(S, C)`` ground-truth matrix of every image, computed once."""
        return tuple(image.histogram_matrix(self.class_count) for image in self.images)

    @cached_property
    def label_matrix(self) -> np.ndarray:
        """Boolean ``(I, C)`` matrix of the image-level ground-truth labels."""
        matrix = np.zeros((len(self.images), self.class_count), dtype=bool)
        for index, image in enumerate(self.images):
            matrix[index, sorted(image.image_labels)] = True
        return matrix

    def image_label_counts(self) -> np.ndarray:
        """Number of images having each class in their label set (``I_c``)."""
        return self.label_matrix.sum(axis=0)


def _arrays_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and a.dtype == b.dtype and np.array_equal(a, b)


def iou(a: Collection[SuperpixelId], b: Collection[SuperpixelId], image: ImageRecord) -> float:
    """Intersection-over-Union of two superpixel sets, measured in pixels."""
    a = frozenset(a)
    b = frozenset(b)
    superpixel_count = len(image.superpixels)
    for superpixel_id in a | b:
        if not 0 <= superpixel_id < superpixel_count:
            raise UnknownSuperpixel(superpixel_id)

    union = a | b
    if not union:
        raise UndefinedRatio("iou", "The IoU of two empty superpixel sets is undefined.")

    pixel_counts = image.pixel_counts
    intersection = int(pixel_counts[list(a & b)].sum()) if a & b else 0
    return intersection / int(pixel_counts[list(union)].sum())


def class_pixel_counts(dataset: Dataset) -> dict[ClassId, int]:
    """Total ground-truth pixels per class (``P_c``), including zero counts."""
    dataset.require_full_supervision("class_pixel_counts")
    totals = np.zeros(dataset.class_count, dtype=np.int64)
    for histogram in dataset.histograms:
        totals += histogram.sum(axis=0)
    return {class_id: int(count) for class_id, count in enumerate(totals)}


def to_weak(dataset: Dataset) -> Dataset:
    """Strip all pixel-level ground truth, keeping only the image labels."""
    images = [
        replace(
            image,
            superpixels=tuple(replace(sp, gt_histogram={}) for sp in image.superpixels),
            gt_region_features={},
        )
        for image in dataset.images
    ]
    return replace(dataset, images=tuple(images), supervision=Supervision.WEAK)


def validate_image(  # noqa: C901
    image: ImageRecord, class_count: int, feature_dim: int, supervision: Supervision
) -> list[str]:
    """Check the invariants of a single image, returning all violations."""
    violations = []
    for index, sp in enumerate(image.superpixels):
        if sp.id != index:
            violations.append(f"superpixel {index} has id {sp.id}")
        if sp.pixel_count <= 0:
            violations.append(f"superpixel {sp.id} has no pixels")
        if any(not 0 <= c < class_count for c in sp.gt_histogram):
            violations.append(f"superpixel {sp.id} references an unknown class")
        if supervision is Supervision.FULL:
            if sum(sp.gt_histogram.values()) != sp.pixel_count:
                violations.append(
                    f"superpixel {sp.id} histogram doesn't sum to its {sp.pixel_count} pixels"
                )
        elif sp.gt_histogram:
            violations.append(f"superpixel {sp.id} has a histogram in a weak dataset")

    if any(not 0 <= c < class_count for c in image.image_labels):
        violations.append("image labels reference an unknown class")
    if supervision is Supervision.FULL and not violations:
        present = {c for sp in image.superpixels for c, n in sp.gt_histogram.items() if n > 0}
        if present != set(image.image_labels):
            violations.append(
                f"image labels {sorted(image.image_labels)} don't match"
                f" the ground-truth classes {sorted(present)}"
            )

    forest_violations = validate_forest(image.forest, image)
    violations.extend(str(v) for v in forest_violations)

    features = image.region_features
    if features.ndim != 2 or features.shape != (image.forest.region_count, feature_dim):
        violations.append(
            f"features have shape {features.shape},"
            f" expected ({image.forest.region_count}, {feature_dim})"
        )
    elif not np.isfinite(features).all():
        violations.append("features contain non-finite values")

    for class_id, values in image.gt_region_features.items():
        if class_id not in image.image_labels:
            violations.append(f"ground-truth features for absent class {class_id}")
        if values.shape != (feature_dim,) or not np.isfinite(values).all():
            violations.append(f"ground-truth features of class {class_id} are invalid")

    return violations


def stack_features(dataset: Dataset, refs: Iterable, class_id: ClassId) -> np.ndarray:
    """Collect the feature vectors for a list of sample references.

    References with ``region_id=None`` point to the ground-truth region of ``class_id``.
    """
    rows = []
    for image_id, region_id in refs:
        image = dataset.images[image_id]
        if region_id is None:
            rows.append(image.gt_region_features[class_id])
        else:
            rows.append(image.region_features[region_id])
    if not rows:
        return np.zeros((0, dataset.feature_dim))
    return np.vstack(rows)
