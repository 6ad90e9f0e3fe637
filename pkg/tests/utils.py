"""Builders for hand-made test instances, and brute-force reference implementations."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from regioncal.datasets import Dataset, ImageRecord, Superpixel
from regioncal.forest import RegionForest, RegionNode
from regioncal.types import Supervision


def leaf_nodes(pixel_counts: Sequence[int]) -> list[RegionNode]:
    return [
        RegionNode(id=index, leaf_link=index, pixel_count=int(count))
        for index, count in enumerate(pixel_counts)
    ]


def flat_forest(pixel_counts: Sequence[int]) -> RegionForest:
    """A single tree: one root directly above all superpixels.

    With a single superpixel, the leaf is the root.
    """
    nodes = leaf_nodes(pixel_counts)
    if len(nodes) == 1:
        return RegionForest(nodes=nodes, roots=[0])
    root = RegionNode(
        id=len(nodes),
        children=tuple(range(len(nodes))),
        pixel_count=int(sum(pixel_counts)),
    )
    return RegionForest(nodes=nodes + [root], roots=[root.id])


def random_forest(
    rng: np.random.Generator,
    pixel_counts: Sequence[int],
    tree_count: int = 2,
    max_children: int = 3,
) -> RegionForest:
    """Build trees by merging random groups of 2 or more nodes, until one root remains."""
    nodes = leaf_nodes(pixel_counts)
    roots = []
    for _ in range(tree_count):
        groups = list(range(len(pixel_counts)))
        while len(groups) > 1:
            size = int(rng.integers(2, min(max_children, len(groups)) + 1))
            picked = set(rng.choice(len(groups), size=size, replace=False).tolist())
            children = tuple(groups[i] for i in sorted(picked))
            node = RegionNode(
                id=len(nodes),
                children=children,
                pixel_count=sum(nodes[child].pixel_count for child in children),
            )
            nodes.append(node)
            groups = [group for i, group in enumerate(groups) if i not in picked] + [node.id]
        if groups[0] not in roots:
            roots.append(groups[0])
    return RegionForest(nodes=nodes, roots=roots)


def make_image(
    image_id: int,
    histograms: Sequence[dict],
    forest: Optional[RegionForest] = None,
    feature_dim: int = 2,
    features: Optional[np.ndarray] = None,
    gt_features: Optional[dict] = None,
) -> ImageRecord:
    """Build a fully supervised image from the per-superpixel class histograms."""
    pixel_counts = [sum(histogram.values()) for histogram in histograms]
    forest = forest or flat_forest(pixel_counts)
    if features is None:
        features = np.zeros((forest.region_count, feature_dim))
    return ImageRecord(
        id=image_id,
        superpixels=[
            Superpixel(id=index, pixel_count=count, gt_histogram=dict(histogram))
            for index, (count, histogram) in enumerate(zip(pixel_counts, histograms))
        ],
        forest=forest,
        region_features=np.asarray(features, dtype=np.float64),
        image_labels=frozenset(c for h in histograms for c, n in h.items() if n > 0),
        gt_region_features=gt_features or {},
    )


def make_dataset(images, class_count: int, feature_dim: int = 2) -> Dataset:
    return Dataset(
        class_count=class_count,
        feature_dim=feature_dim,
        images=tuple(images),
        supervision=Supervision.FULL,
    )


def random_dataset(
    rng: np.random.Generator,
    class_count: int,
    images: int = 5,
    superpixels: int = 6,
    tree_count: int = 2,
) -> Dataset:
    """Random histograms and forests, each superpixel has 1 or 2 classes."""
    records = []
    for image_id in range(images):
        histograms = []
        for _ in range(superpixels):
            classes = rng.choice(class_count, size=int(rng.integers(1, 3)), replace=False)
            histograms.append({int(c): int(rng.integers(1, 20)) for c in classes})
        pixel_counts = [sum(h.values()) for h in histograms]
        forest = random_forest(rng, pixel_counts, tree_count=tree_count)
        records.append(make_image(image_id, histograms, forest=forest))
    return make_dataset(records, class_count)


def random_scores(rng: np.random.Generator, dataset: Dataset, ties=False) -> list[np.ndarray]:
    """Raw scores for every image. With ``ties``, scores come from a few distinct values."""
    scores = []
    for image in dataset.images:
        shape = (image.region_count, dataset.class_count)
        if ties:
            scores.append(rng.integers(-2, 3, size=shape).astype(np.float64))
        else:
            scores.append(rng.normal(size=shape))
    return scores


def recount_fs_loss(labelings, dataset: Dataset) -> float:
    """One minus the class-average pixel accuracy, counted superpixel by superpixel."""
    correct = np.zeros(dataset.class_count)
    total = np.zeros(dataset.class_count)
    for labels, image in zip(labelings, dataset.images):
        for sp in image.superpixels:
            for class_id, count in sp.gt_histogram.items():
                total[class_id] += count
                if labels[sp.id] == class_id:
                    correct[class_id] += count
    present = total > 0
    return 1.0 - float(np.mean(correct[present] / total[present]))


def brute_force_labels(forest: RegionForest, calibrated: np.ndarray) -> np.ndarray:
    """The highest calibrated score over all regions containing each superpixel.

    Only meant for inputs without ties.
    """
    membership = forest.membership_matrix
    labels = np.zeros(forest.superpixel_count, dtype=np.intp)
    for superpixel_id in range(forest.superpixel_count):
        candidates = calibrated[membership[:, superpixel_id]]
        labels[superpixel_id] = np.unravel_index(candidates.argmax(), candidates.shape)[1]
    return labels


def suppression_dataset() -> tuple[Dataset, list[np.ndarray]]:
    """A large background class that suppresses a small rare class.

    Class 0 is background, class 1 is rare. The raw scores are given directly:

    * 4 images with a large background superpixel (90 px) and a small rare one (10 px).
      The root region scores high for background, so it hides the rare superpixel.
    * 1 image with two background superpixels, where all regions score 1.0 for rare.
    * 1 image with a single rare superpixel.

    Without calibration the rare superpixels under a root are lost,
    giving a class-average accuracy of 0.6.
    """
    images = []
    scores = []
    for image_id in range(4):
        images.append(make_image(image_id, [{0: 90}, {1: 10}], feature_dim=1))
        scores.append(np.array([[2.0, -3.0], [-2.0, 1.0], [2.0, -3.0]]))

    images.append(make_image(4, [{0: 5}, {0: 5}], feature_dim=1))
    scores.append(np.array([[2.0, 1.0], [2.0, 1.0], [2.0, 1.0]]))

    images.append(make_image(5, [{1: 10}], feature_dim=1))
    scores.append(np.array([[-2.0, 1.0]]))
    return make_dataset(images, class_count=2, feature_dim=1), scores
