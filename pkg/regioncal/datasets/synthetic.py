"""Synthetic datasets, standing in for real images and CNN features.

Superpixels are laid out along a scanline, so adjacent superpixels have consecutive ids.
Objects are contiguous runs of superpixels of a single class. Run classes are drawn from
a power law over the class ranks, which gives the class imbalance typical for semantic
segmentation datasets. Every class is kept out of a share of the images, so even the
most frequent class has images to take negative samples from.

The region hierarchies are built like Selective Search does: greedily merge the most
similar pair of adjacent regions until a single region covers the image.
Every hierarchy uses a different similarity measure over the same superpixels:

* hierarchy 0: appearance (distance between the mean class mixtures), then size.
* hierarchy 1: size only, which merges small regions first.
* further hierarchies: random adjacent pairs.

Features are the pixel-weighted mean of the class cluster centers covered by a region,
plus Gaussian noise. The cluster centers are the vertices of a scaled simplex,
at ``cluster_separation`` distance from each other. With fewer feature dimensions
than classes, the centers are random directions at that distance on average.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from regioncal.exceptions import InvalidParameterValue
from regioncal.forest import RegionForest, RegionNode
from regioncal.types import Supervision

from .base import Dataset, ImageRecord, Superpixel, to_weak

logger = logging.getLogger(__name__)

__all__ = [
    "SyntheticConfig",
    "generate_synthetic",
    "class_frequencies",
    "class_centers",
]


@dataclass(frozen=True)
class SyntheticConfig:
    """The settings for :func:`generate_synthetic`. The seed determines the whole output."""

    class_count: int = 8
    images: int = 64
    superpixels_per_image: int = 32
    hierarchy_count: int = 2

    #: Class ``k`` (by rank, 1-based) gets a pixel share proportional to ``k ** -exponent``.
    imbalance_exponent: float = 1.0

    feature_dim: int = 16
    cluster_separation: float = 4.0
    noise_sigma: float = 0.5

    #: Mean length (in superpixels) of an object run.
    run_length: float = 2.0

    #: Share of the images that each class is kept out of.
    absent_fraction: float = 0.25

    #: Range of pixel counts for a single superpixel (inclusive).
    min_pixels: int = 40
    max_pixels: int = 60

    supervision: Supervision = Supervision.FULL
    seed: int = 0

    def validate(self):
        if self.class_count < 2:
            raise InvalidParameterValue("class_count", "At least 2 classes are required.")
        if self.superpixels_per_image < 2:
            raise InvalidParameterValue(
                "superpixels_per_image", "At least 2 superpixels per image are required."
            )
        for name in ("images", "hierarchy_count", "feature_dim", "min_pixels"):
            if getattr(self, name) < 1:
                raise InvalidParameterValue(name, f"The {name} should be positive.")
        for name in ("imbalance_exponent", "cluster_separation", "noise_sigma"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterValue(name, f"The {name} can't be negative.")
        if self.run_length < 1:
            raise InvalidParameterValue("run_length", "Runs are at least 1 superpixel long.")
        if self.max_pixels < self.min_pixels:
            raise InvalidParameterValue("max_pixels", "max_pixels is below min_pixels.")
        if not 0 <= self.absent_fraction < 1:
            raise InvalidParameterValue(
                "absent_fraction", "The absent_fraction should be in the range [0, 1)."
            )
        if self.seed < 0:
            raise InvalidParameterValue("seed", "The seed can't be negative.")


def class_frequencies(class_count: int, exponent: float) -> np.ndarray:
    """Expected pixel share per class: normalized ``k ** -exponent`` for ``k = 1..C``."""
    weights = np.arange(1, class_count + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


def class_centers(
    class_count: int, feature_dim: int, separation: float, seed: int = 0
) -> np.ndarray:
    """Cluster centers on a simplex, with pairwise distance ``separation``.

    When ``feature_dim < class_count`` there is no such simplex. The centers are then
    seeded random unit directions, scaled so the root mean square distance is ``separation``.
    """
    if feature_dim >= class_count:
        centers = np.zeros((class_count, feature_dim))
        centers[np.arange(class_count), np.arange(class_count)] = 1.0
    else:
        centers = np.random.default_rng(seed).normal(size=(class_count, feature_dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return centers * (separation / np.sqrt(2.0))


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    config.validate()
    rng = np.random.default_rng(config.seed)
    centers = class_centers(
        config.class_count, config.feature_dim, config.cluster_separation, seed=config.seed
    )

    # First draw the layout of all images and the classes each image may contain.
    # The class weights are then fitted, so the runs of all images together
    # follow the power law.
    layouts = []
    for _ in range(config.images):
        pixel_counts = rng.integers(
            config.min_pixels, config.max_pixels, endpoint=True, size=config.superpixels_per_image
        )
        layouts.append((pixel_counts, _draw_runs(rng, config)))

    allowed = _allowed_classes(rng, config.class_count, config.images, config.absent_fraction)
    weights = _class_weights(
        class_frequencies(config.class_count, config.imbalance_exponent),
        allowed,
        np.array([len(runs) for _, runs in layouts]),
    )

    images = []
    for image_id, (pixel_counts, runs) in enumerate(layouts):
        shares = allowed[image_id] * weights
        classes = _systematic_sample(rng, shares / shares.sum(), len(runs))
        images.append(
            _build_image(
                rng, config, centers, image_id, pixel_counts, np.repeat(classes, runs)
            )
        )

    dataset = Dataset(
        class_count=config.class_count,
        feature_dim=config.feature_dim,
        images=tuple(images),
        supervision=Supervision.FULL,
    )
    logger.info(
        "Generated %d images with %d classes (seed %d)",
        config.images,
        config.class_count,
        config.seed,
    )

    if config.supervision is Supervision.WEAK:
        dataset = to_weak(dataset)
    return dataset


def _draw_runs(rng: np.random.Generator, config: SyntheticConfig) -> np.ndarray:
    """Split the scanline into object runs, with lengths uniform on ``1..2L-1``."""
    longest = max(1, int(round(2 * config.run_length - 1)))
    remaining = config.superpixels_per_image
    runs = []
    while remaining > 0:
        length = min(int(rng.integers(1, longest, endpoint=True)), remaining)
        runs.append(length)
        remaining -= length
    return np.array(runs, dtype=np.intp)


def _systematic_sample(rng: np.random.Generator, frequencies: np.ndarray, count: int):
    """Draw ``count`` classes with low-variance (systematic) sampling, in random order.

    Each class appears within one of its expected count,
    while every single draw still follows the class frequencies.
    """
    cumulative = np.cumsum(frequencies)
    cumulative /= cumulative[-1]
    positions = (rng.random() + np.arange(count)) / max(count, 1)
    classes = np.searchsorted(cumulative, positions, side="right")
    classes = np.minimum(classes, len(frequencies) - 1)
    return rng.permutation(classes)


def _allowed_classes(rng: np.random.Generator, class_count: int, image_count: int, fraction):
    """Tell which classes may occur in each image, as ``(I, C)`` mask.

    Each class is kept out of ``fraction`` of the images, at least one when there
    are multiple images. Every image keeps at least one allowed class.
    """
    allowed = np.ones((image_count, class_count), dtype=bool)
    excluded_count = 0
    if fraction > 0 and image_count > 1:
        excluded_count = min(max(1, int(round(fraction * image_count))), image_count - 1)

    for class_id in range(class_count):
        candidates = np.flatnonzero(allowed.sum(axis=1) > 1)
        size = min(excluded_count, len(candidates))
        allowed[rng.choice(candidates, size=size, replace=False), class_id] = False
    return allowed


def _class_weights(frequencies: np.ndarray, allowed: np.ndarray, run_counts: np.ndarray):
    """Fit the class weights, so drawing the runs of each image from its allowed classes
    gives every class its share of all runs.

    This alternately rescales the weights by the target over the expected run counts.
    When a class is too frequent to fit in its allowed images, it fills them instead.
    """
    weights = frequencies.copy()
    target = frequencies * run_counts.sum()
    for _ in range(500):
        shares = allowed * weights
        shares /= shares.sum(axis=1, keepdims=True)
        expected = run_counts @ shares
        weights = weights * np.where(expected > 0, target / np.maximum(expected, 1e-300), 1.0)
        weights /= weights.sum()
    return weights


def _build_image(rng, config, centers, image_id, pixel_counts, superpixel_classes):
    class_count = config.class_count
    superpixels = tuple(
        Superpixel(id=index, pixel_count=int(count), gt_histogram={int(class_id): int(count)})
        for index, (count, class_id) in enumerate(zip(pixel_counts, superpixel_classes))
    )
    histograms = np.zeros((len(superpixels), class_count), dtype=np.int64)
    histograms[np.arange(len(superpixels)), superpixel_classes] = pixel_counts

    forest = _build_forest(rng, config, histograms, centers)

    region_histograms = forest.membership_matrix.astype(np.int64) @ histograms
    mixtures = region_histograms / region_histograms.sum(axis=1, keepdims=True)
    features = mixtures @ centers + rng.normal(
        0.0, config.noise_sigma, size=(forest.region_count, config.feature_dim)
    )

    labels = sorted({int(c) for c in superpixel_classes})
    gt_features = {
        class_id: centers[class_id] + rng.normal(0.0, config.noise_sigma, config.feature_dim)
        for class_id in labels
    }

    return ImageRecord(
        id=image_id,
        superpixels=superpixels,
        forest=forest,
        region_features=features,
        image_labels=frozenset(labels),
        gt_region_features=gt_features,
    )


def _build_forest(rng, config, histograms, centers) -> RegionForest:
    """Build all hierarchies by greedy merging of adjacent regions."""
    pixel_counts = histograms.sum(axis=1)
    nodes = [
        RegionNode(id=index, leaf_link=index, pixel_count=int(count))
        for index, count in enumerate(pixel_counts)
    ]
    roots = []
    for tree_index in range(config.hierarchy_count):
        # Each group: (node id, class mass vector); adjacency follows the list order.
        groups = [
            (index, histogram.astype(np.float64)) for index, histogram in enumerate(histograms)
        ]
        while len(groups) > 1:
            position = _pick_merge(rng, tree_index, groups, centers)
            (left_id, left_mass), (right_id, right_mass) = groups[position : position + 2]
            node = RegionNode(
                id=len(nodes),
                children=(left_id, right_id),
                pixel_count=nodes[left_id].pixel_count + nodes[right_id].pixel_count,
            )
            nodes.append(node)
            groups[position : position + 2] = [(node.id, left_mass + right_mass)]
        roots.append(groups[0][0])

    return RegionForest(nodes=tuple(nodes), roots=tuple(roots))


def _pick_merge(rng, tree_index, groups, centers) -> int:
    """Tell which adjacent pair ``(i, i+1)`` to merge next."""
    if tree_index >= 2:
        return int(rng.integers(0, len(groups) - 1))

    best_key = None
    best_position = 0
    for position in range(len(groups) - 1):
        left_mass = groups[position][1]
        right_mass = groups[position + 1][1]
        size = left_mass.sum() + right_mass.sum()
        if tree_index == 0:
            distance = np.linalg.norm(
                left_mass @ centers / left_mass.sum() - right_mass @ centers / right_mass.sum()
            )
            key = (round(float(distance), 9), size)
        else:
            key = (size,)
        if best_key is None or key < best_key:
            best_key = key
            best_position = position
    return best_position
