"""Training samples of the one-vs-all classifiers.

Samples are references to regions (:class:`~regioncal.types.SampleRef`),
the features are looked up in the dataset only when a classifier is trained.

With pixel-level ground truth, the positives of class ``c`` are the
ground-truth regions of ``c`` and all region proposals that overlap one of
them with an Intersection-over-Union above the threshold (0.5). The negatives
are all region proposals of the images that don't contain ``c`` at all.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from regioncal import conf
from regioncal.datasets import Dataset, ImageRecord
from regioncal.exceptions import TrainingFailed
from regioncal.types import ClassId, SampleRef

logger = logging.getLogger(__name__)

__all__ = [
    "ClassSamples",
    "TrainingSet",
    "build_training_set",
    "assemble_training_set_fs",
    "proposal_ious",
]


@dataclass(frozen=True)
class ClassSamples:
    class_id: ClassId
    positives: tuple[SampleRef, ...]
    negatives: tuple[SampleRef, ...]

    @property
    def trainable(self) -> bool:
        return bool(self.positives) and bool(self.negatives)

    @property
    def region_positives(self) -> tuple[SampleRef, ...]:
        """The positives that are region proposals (not ground-truth regions)."""
        return tuple(ref for ref in self.positives if ref.region_id is not None)


@dataclass(frozen=True)
class TrainingSet:
    classes: tuple[ClassSamples, ...]

    def __getitem__(self, class_id: ClassId) -> ClassSamples:
        return self.classes[class_id]

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    @property
    def untrainable_classes(self) -> list[ClassId]:
        return [samples.class_id for samples in self.classes if not samples.trainable]

    def counts(self) -> list[tuple[int, int]]:
        return [(len(samples.positives), len(samples.negatives)) for samples in self.classes]


def build_training_set(
    class_count: int,
    positives: Mapping[ClassId, Iterable[SampleRef]],
    negatives: Mapping[ClassId, Iterable[SampleRef]],
) -> TrainingSet:
    """Construct the training set, with samples in a fixed (sorted) order."""
    classes = []
    for class_id in range(class_count):
        class_positives = _sorted_refs(positives.get(class_id, ()))
        class_negatives = _sorted_refs(negatives.get(class_id, ()))
        overlap = set(class_positives) & set(class_negatives)
        if overlap:
            raise TrainingFailed(
                f"class {class_id}",
                f"Class {class_id} has {len(overlap)} samples"
                " that are both positive and negative.",
            )
        if not class_positives:
            logger.warning("Class %d has no positive samples, it can't be trained.", class_id)
        elif not class_negatives:
            logger.warning("Class %d has no negative samples, it can't be trained.", class_id)
        classes.append(ClassSamples(class_id, class_positives, class_negatives))
    return TrainingSet(tuple(classes))


def _sorted_refs(refs: Iterable[SampleRef]) -> tuple[SampleRef, ...]:
    # Ground-truth regions (region_id=None) sort before the proposals of an image.
    return tuple(
        sorted(
            {SampleRef(*ref) for ref in refs},
            key=lambda ref: (ref.image_id, -1 if ref.region_id is None else ref.region_id),
        )
    )


def proposal_ious(image: ImageRecord, superpixels: Iterable[int]) -> np.ndarray:
    """The Intersection-over-Union of every region proposal with a superpixel set.

    This gives the same values as :func:`~regioncal.datasets.iou`, for all regions at once.
    """
    pixel_counts = image.pixel_counts
    target = np.zeros(len(pixel_counts), dtype=np.int64)
    target[list(superpixels)] = pixel_counts[list(superpixels)]

    membership = image.forest.membership_matrix.astype(np.int64)
    intersection = membership @ target
    union = membership @ pixel_counts + target.sum() - intersection
    return intersection / union


def assemble_training_set_fs(dataset: Dataset, iou_threshold: Optional[float] = None):
    """Collect the training samples using the pixel-level ground truth."""
    dataset.require_full_supervision("assemble_training_set_fs")
    if iou_threshold is None:
        iou_threshold = conf.REGIONCAL_IOU_THRESHOLD

    positives = {class_id: [] for class_id in range(dataset.class_count)}
    negatives = {class_id: [] for class_id in range(dataset.class_count)}
    skipped_gt = 0
    for image in dataset.images:
        for class_id, superpixels in image.ground_truth_regions().items():
            if class_id in image.gt_region_features:
                positives[class_id].append(SampleRef(image.id, None))
            else:
                skipped_gt += 1

            ious = proposal_ious(image, superpixels)
            positives[class_id].extend(
                SampleRef(image.id, int(region_id))
                for region_id in np.flatnonzero(ious > iou_threshold)
            )

        all_regions = [SampleRef(image.id, r) for r in range(image.region_count)]
        for class_id in range(dataset.class_count):
            if class_id not in image.image_labels:
                negatives[class_id].extend(all_regions)

    if skipped_gt:
        logger.info("Skipped %d ground-truth regions without features.", skipped_gt)
    return build_training_set(dataset.class_count, positives, negatives)
