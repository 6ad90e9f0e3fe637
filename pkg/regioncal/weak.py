"""Training with image-level labels only.

Without pixel-level ground truth, the class of a region is unknown (latent).
Training starts by taking all regions of an image as positives for every label
of that image. The classifiers are then trained and each region is relabeled to
the highest scoring class among its image labels. This alternates until the
assignment no longer changes, or the number of rounds is reached.

The negatives of class ``c`` are the regions of all images without label ``c``.
These are certain, so they stay fixed during all rounds.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from regioncal import conf
from regioncal.calibration.losses import evaluate_loss
from regioncal.calibration.sigmoid import GridSpec
from regioncal.datasets import Dataset
from regioncal.exceptions import DatasetParsingFailed, DimensionMismatch, ExternalParsingError
from regioncal.output.jsonl import JsonLinesWriter
from regioncal.parsers.jsonl import read_jsonl
from regioncal.parsers.values import parse_int
from regioncal.svm.samples import TrainingSet, build_training_set
from regioncal.svm.scoring import score_all
from regioncal.svm.training import LinearModel, MiningConfig, train_all
from regioncal.types import ClassId, LossKind, SampleRef

logger = logging.getLogger(__name__)

__all__ = [
    "LatentAssignment",
    "RoundSummary",
    "AlternationResult",
    "init_latent",
    "relabel",
    "alternate_train",
    "save_assignment",
    "load_assignment",
    "snapshot_path",
]


@dataclass(frozen=True)
class LatentAssignment:
    """The current positives and the fixed negatives of every class."""

    positives: tuple[frozenset[SampleRef], ...]
    negatives: tuple[frozenset[SampleRef], ...]

    @property
    def class_count(self) -> int:
        return len(self.positives)

    def positive_counts(self) -> list[int]:
        return [len(positives) for positives in self.positives]

    def training_set(self) -> TrainingSet:
        return build_training_set(
            self.class_count,
            dict(enumerate(self.positives)),
            dict(enumerate(self.negatives)),
        )

    def check(self, dataset: Dataset):
        """Check that the assignment refers to existing regions of the dataset."""
        if self.class_count != dataset.class_count:
            raise DimensionMismatch(
                "assignment",
                f"Assignment has {self.class_count} classes,"
                f" the dataset has {dataset.class_count}.",
            )
        for refs in self.positives + self.negatives:
            for image_id, region_id in refs:
                if image_id >= len(dataset.images) or (
                    region_id >= dataset.images[image_id].region_count
                ):
                    raise DimensionMismatch(
                        "assignment",
                        f"Assignment refers to unknown region {region_id} of image {image_id}.",
                    )

    def region_labels(self, dataset: Dataset) -> list[np.ndarray]:
        """Per image, the class each region is a positive for (``-1`` for none).

        After relabeling, every region of a labeled image is positive for one class.
        When a region is positive for several classes, the lowest class id is returned.
        """
        labels = [np.full(image.region_count, -1, dtype=np.intp) for image in dataset.images]
        for class_id in reversed(range(self.class_count)):
            for ref in self.positives[class_id]:
                labels[ref.image_id][ref.region_id] = class_id
        return labels


@dataclass(frozen=True)
class RoundSummary:
    round: int
    positive_counts: tuple[int, ...]

    #: Number of (region, class) positives that changed by relabeling.
    changed: int

    #: The weakly supervised loss with the initial calibration, if tracked.
    loss: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "positive_counts": list(self.positive_counts),
            "changed": self.changed,
            "loss": self.loss,
        }


@dataclass
class AlternationResult:
    models: list[LinearModel]
    assignment: LatentAssignment
    history: list[RoundSummary] = field(default_factory=list)
    converged: bool = False

    def __iter__(self):
        return iter((self.models, self.assignment, self.history))


def init_latent(dataset: Dataset) -> LatentAssignment:
    """Take every region of an image as positive for all labels of the image."""
    positives = [set() for _ in range(dataset.class_count)]
    negatives = [set() for _ in range(dataset.class_count)]
    for image in dataset.images:
        regions = [SampleRef(image.id, r) for r in range(image.region_count)]
        for class_id in range(dataset.class_count):
            if class_id in image.image_labels:
                positives[class_id].update(regions)
            else:
                negatives[class_id].update(regions)

    for class_id, class_positives in enumerate(positives):
        if not class_positives:
            logger.warning("Class %d occurs in no image, it can't be trained.", class_id)

    return LatentAssignment(
        positives=tuple(map(frozenset, positives)),
        negatives=tuple(map(frozenset, negatives)),
    )


def relabel(
    dataset: Dataset,
    models: Sequence[LinearModel],
    assignment: LatentAssignment,
    jobs: int = 1,
) -> LatentAssignment:
    """Make every region a positive for the best scoring class among its image labels.

    Ties go to the lowest class id. The negatives are not changed.
    """
    if assignment.class_count != dataset.class_count:
        raise DimensionMismatch(
            "assignment",
            f"Assignment has {assignment.class_count} classes,"
            f" the dataset has {dataset.class_count}.",
        )

    scores = score_all(models, dataset, jobs=jobs)
    positives = [set() for _ in range(dataset.class_count)]
    for image, image_scores in zip(dataset.images, scores):
        labels = np.array(sorted(image.image_labels), dtype=np.intp)
        if not len(labels):
            continue
        winners = labels[image_scores[:, labels].argmax(axis=1)]
        for region_id, class_id in enumerate(winners):
            positives[class_id].add(SampleRef(image.id, region_id))

    return LatentAssignment(
        positives=tuple(map(frozenset, positives)),
        negatives=assignment.negatives,
    )


def alternate_train(
    dataset: Dataset,
    rounds: Optional[int] = None,
    reg: Optional[float] = None,
    mining: Optional[MiningConfig] = None,
    jobs: int = 1,
    snapshot_dir=None,
    track_loss: bool = False,
) -> AlternationResult:
    """Alternate between training the classifiers and relabeling the regions.

    The returned models are those of the last round,
    trained on the assignment before its final relabeling.

    :param snapshot_dir: When given, the assignment of every round is written there.
    :param track_loss: Record the weakly supervised loss of every round.
    """
    rounds = conf.REGIONCAL_WS_ROUNDS if rounds is None else rounds
    assignment = init_latent(dataset)
    result = AlternationResult(models=[], assignment=assignment)

    for round_number in range(1, rounds + 1):
        result.models = train_all(dataset, assignment.training_set(), reg, mining, jobs)
        new_assignment = relabel(dataset, result.models, assignment, jobs=jobs)
        changed = sum(
            len(old ^ new) for old, new in zip(assignment.positives, new_assignment.positives)
        )

        loss = None
        if track_loss:
            loss = _initial_calibration_loss(dataset, result.models, jobs)

        summary = RoundSummary(
            round=round_number,
            positive_counts=tuple(new_assignment.positive_counts()),
            changed=changed,
            loss=loss,
        )
        result.history.append(summary)
        logger.info(
            "Round %d: %d positives changed, positive counts %s",
            round_number,
            changed,
            list(summary.positive_counts),
        )

        if snapshot_dir is not None:
            path = snapshot_path(snapshot_dir, round_number)
            save_assignment(new_assignment, path, round_number)

        assignment = new_assignment
        if not changed:
            result.converged = True
            break

    result.assignment = assignment
    return result


def _initial_calibration_loss(dataset: Dataset, models, jobs: int) -> float:
    params = GridSpec().initial_params(dataset.class_count)
    scores = score_all(models, dataset, jobs=jobs)
    return evaluate_loss(dataset, scores, params, LossKind.WEAKLY_SUPERVISED, jobs=jobs)


def snapshot_path(directory, round_number: int) -> Path:
    return Path(directory) / f"round-{round_number:02d}.jsonl"


def save_assignment(assignment: LatentAssignment, path, round_number: int = 0):
    """Write the assignment: a header line, then one line per class.

    Each sample is written as ``[image_id, region_id]``.
    """
    with JsonLinesWriter(path) as writer:
        writer.write({"class_count": assignment.class_count, "round": round_number, "version": 1})
        for class_id in range(assignment.class_count):
            writer.write(
                {
                    "class_id": class_id,
                    "positives": sorted(map(list, assignment.positives[class_id])),
                    "negatives": sorted(map(list, assignment.negatives[class_id])),
                }
            )


def load_assignment(path) -> LatentAssignment:
    records = read_jsonl(path)
    header = next(records, None)
    if header is None:
        raise DatasetParsingFailed(str(path), f"Assignment file {path} is empty.")
    class_count = header.get("class_count", lambda v: parse_int(v, minimum=1))

    positives = []
    negatives = []
    for record in records:
        class_id: ClassId = record.get("class_id", parse_int)
        if class_id != len(positives):
            raise record.error(f"class id {class_id} is out of order")
        positives.append(record.get("positives", _parse_refs))
        negatives.append(record.get("negatives", _parse_refs))

    if len(positives) != class_count:
        raise DimensionMismatch(
            str(path), f"Assignment file {path} has {len(positives)} of {class_count} classes."
        )
    return LatentAssignment(positives=tuple(positives), negatives=tuple(negatives))


def _parse_refs(raw_value) -> frozenset[SampleRef]:
    if not isinstance(raw_value, list):
        raise ExternalParsingError("Expected a list of [image_id, region_id] pairs")
    refs = set()
    for pair in raw_value:
        if not isinstance(pair, list) or len(pair) != 2:
            raise ExternalParsingError(f"Expected an [image_id, region_id] pair, got {pair!r}")
        refs.add(SampleRef(parse_int(pair[0], minimum=0), parse_int(pair[1], minimum=0)))
    return frozenset(refs)
