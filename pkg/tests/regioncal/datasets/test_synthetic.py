from dataclasses import replace

import numpy as np
import pytest

from regioncal.datasets import (
    SyntheticConfig,
    class_frequencies,
    class_pixel_counts,
    generate_synthetic,
    save_dataset,
    validate_image,
)
from regioncal.datasets.synthetic import _allowed_classes, _class_weights, class_centers
from regioncal.exceptions import InvalidParameterValue
from regioncal.svm import assemble_training_set_fs
from regioncal.types import Supervision


def test_structure():
    dataset = generate_synthetic(
        SyntheticConfig(class_count=2, images=1, superpixels_per_image=4, seed=7)
    )
    assert len(dataset) == 1
    image = dataset.images[0]
    forest = image.forest

    assert len(image.superpixels) == 4
    assert len(forest.roots) == 2
    assert sorted(forest.leaf_nodes.tolist()) == [0, 1, 2, 3]
    for root in forest.roots:
        assert forest.superpixel_sets[root] == frozenset(range(4))
        assert forest.nodes[root].pixel_count == image.area
    assert validate_image(image, 2, dataset.feature_dim, Supervision.FULL) == []


def test_hierarchy_count():
    config = SyntheticConfig(images=2, superpixels_per_image=6, hierarchy_count=3, seed=1)
    dataset = generate_synthetic(config)
    for image in dataset.images:
        assert len(image.forest.roots) == 3
        # Binary merge trees: S - 1 internal regions per tree.
        assert image.region_count == 6 + 3 * 5


def test_deterministic(tmp_path):
    config = SyntheticConfig(class_count=4, images=5, seed=11)
    first = generate_synthetic(config)
    second = generate_synthetic(config)
    assert first == second

    save_dataset(first, tmp_path / "a.jsonl")
    save_dataset(second, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_seed_changes_output():
    config = SyntheticConfig(class_count=4, images=5, seed=11)
    assert generate_synthetic(config) != generate_synthetic(replace(config, seed=12))


def test_power_law_frequencies():
    config = SyntheticConfig(class_count=5, imbalance_exponent=1.5, images=200, seed=3)
    pixels = np.array(list(class_pixel_counts(generate_synthetic(config)).values()))
    expected = class_frequencies(5, 1.5)

    relative_error = np.abs(pixels / pixels.sum() - expected) / expected
    assert relative_error.max() < 0.1


def test_class_frequencies():
    np.testing.assert_allclose(class_frequencies(3, 1.0), np.array([1, 1 / 2, 1 / 3]) / (11 / 6))
    np.testing.assert_allclose(class_frequencies(4, 0.0), [0.25] * 4)


def test_class_centers_separation():
    centers = class_centers(4, 6, separation=3.0)
    distances = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
    np.testing.assert_allclose(distances[~np.eye(4, dtype=bool)], 3.0)


def test_class_centers_fewer_dimensions():
    centers = class_centers(33, 16, separation=4.0, seed=2)

    assert centers.shape == (33, 16)
    np.testing.assert_allclose(np.linalg.norm(centers, axis=1), 4.0 / np.sqrt(2.0))
    np.testing.assert_array_equal(centers, class_centers(33, 16, separation=4.0, seed=2))
    assert len(np.unique(centers.round(9), axis=0)) == 33


def test_more_classes_than_dimensions():
    config = SyntheticConfig(class_count=33, feature_dim=16, images=4, superpixels_per_image=8)
    dataset = generate_synthetic(config)

    assert dataset.class_count == 33
    for image in dataset.images:
        assert validate_image(image, 33, 16, Supervision.FULL) == []


@pytest.mark.parametrize("exponent", [1.0, 2.0])
def test_every_class_has_negative_images(exponent):
    """Even the most frequent class is missing from some images, so it can be trained."""
    dataset = generate_synthetic(SyntheticConfig(imbalance_exponent=exponent, seed=1))
    for class_id in range(dataset.class_count):
        without = [image for image in dataset.images if class_id not in image.image_labels]
        assert len(without) >= 1

    assert assemble_training_set_fs(dataset).untrainable_classes == []


def test_absent_fraction():
    config = SyntheticConfig(class_count=3, imbalance_exponent=0.0, images=20, seed=4)
    for fraction, minimum in ((0.0, 0), (0.25, 5)):
        dataset = generate_synthetic(replace(config, absent_fraction=fraction))
        absent = [
            sum(class_id not in image.image_labels for image in dataset.images)
            for class_id in range(3)
        ]
        assert min(absent) >= minimum


def test_allowed_classes(rng):
    allowed = _allowed_classes(rng, class_count=2, image_count=8, fraction=0.75)

    # 6 images are wanted per class, but every image keeps one class.
    assert allowed.sum(axis=1).min() == 1
    assert (~allowed[:, 0]).sum() == 6
    assert (~allowed[:, 1]).sum() == 2


def test_class_weights_match_frequencies(rng):
    frequencies = class_frequencies(4, 1.5)
    allowed = _allowed_classes(rng, 4, 30, 0.25)
    run_counts = rng.integers(5, 20, size=30)
    weights = _class_weights(frequencies, allowed, run_counts)

    shares = allowed * weights
    expected = run_counts @ (shares / shares.sum(axis=1, keepdims=True))
    np.testing.assert_allclose(expected / run_counts.sum(), frequencies, rtol=1e-4)


def test_region_features_follow_mixture():
    """Without noise, a region feature is the pixel-weighted mean of its class centers."""
    config = SyntheticConfig(class_count=3, images=2, superpixels_per_image=6, noise_sigma=0.0)
    dataset = generate_synthetic(config)
    centers = class_centers(3, config.feature_dim, config.cluster_separation)
    for image in dataset.images:
        for region_id in range(image.region_count):
            histogram = image.region_histogram(region_id, 3)
            expected = histogram @ centers / histogram.sum()
            np.testing.assert_allclose(image.region_features[region_id], expected)
        for class_id, features in image.gt_region_features.items():
            np.testing.assert_array_equal(features, centers[class_id])


def test_weak():
    config = SyntheticConfig(class_count=3, images=3, seed=5)
    full = generate_synthetic(config)
    weak = generate_synthetic(replace(config, supervision=Supervision.WEAK))

    assert weak.supervision is Supervision.WEAK
    for full_image, weak_image in zip(full.images, weak.images):
        assert weak_image.image_labels == full_image.image_labels
        assert weak_image.forest == full_image.forest
        assert all(not sp.gt_histogram for sp in weak_image.superpixels)


@pytest.mark.parametrize(
    "changes,locator",
    [
        ({"class_count": 1}, "class_count"),
        ({"superpixels_per_image": 1}, "superpixels_per_image"),
        ({"images": 0}, "images"),
        ({"noise_sigma": -0.1}, "noise_sigma"),
        ({"run_length": 0.5}, "run_length"),
        ({"min_pixels": 10, "max_pixels": 5}, "max_pixels"),
        ({"absent_fraction": 1.0}, "absent_fraction"),
        ({"absent_fraction": -0.1}, "absent_fraction"),
    ],
)
def test_invalid_config(changes, locator):
    with pytest.raises(InvalidParameterValue) as e:
        generate_synthetic(replace(SyntheticConfig(), **changes))

    assert e.value.locator == locator
    assert e.value.exit_code == 2
