import numpy as np
import pytest
from django.test import override_settings

from regioncal.calibration.losses import (
    LookupTables,
    LossEvaluator,
    column_cache_size,
    evaluate_loss,
    fs_class_accuracies,
    fs_loss,
    label_dataset,
    output_label_matrix,
    ws_class_mismatches,
    ws_loss,
)
from regioncal.calibration.sigmoid import CalibrationParams
from regioncal.datasets import to_weak
from regioncal.exceptions import DimensionMismatch, UndefinedRatio, UnsupportedSupervision
from regioncal.types import LossKind
from tests.utils import (
    make_dataset,
    make_image,
    random_dataset,
    random_scores,
    recount_fs_loss,
)


@pytest.fixture()
def dataset():
    """Class 0 has 100 pixels, class 1 has 50, class 2 has none."""
    image = make_image(0, [{0: 100}, {1: 30}, {1: 20}])
    return make_dataset([image], class_count=3)


def test_fs_loss_hand_count(dataset):
    # Class 0: 100/100, class 1: 30/50, class 2 is left out.
    assert fs_loss([np.array([0, 1, 0])], dataset) == pytest.approx(0.2)


def test_fs_loss_perfect(dataset):
    assert fs_loss([np.array([0, 1, 1])], dataset) == 0.0


def test_fs_loss_mixed_superpixel():
    dataset = make_dataset([make_image(0, [{0: 6, 1: 4}])], class_count=2)
    # Class 0: 6/6, class 1: 0/4
    assert fs_loss([np.array([0])], dataset) == pytest.approx(0.5)
    accuracies, present = fs_class_accuracies([np.array([1])], dataset)
    np.testing.assert_allclose(accuracies, [0.0, 1.0])
    assert present.tolist() == [True, True]


def test_fs_loss_recount(rng):
    dataset = random_dataset(rng, class_count=5, images=6, superpixels=8)
    for _ in range(10):
        labelings = [rng.integers(0, 5, size=8) for _ in dataset.images]
        assert fs_loss(labelings, dataset) == pytest.approx(recount_fs_loss(labelings, dataset))


def test_fs_loss_scale_invariant(rng):
    """Multiplying all pixel counts by 4 doesn't change the loss."""
    images = []
    scaled = []
    for image_id in range(4):
        histograms = [
            {int(c): int(rng.integers(1, 10)) for c in rng.choice(3, size=2, replace=False)}
            for _ in range(5)
        ]
        images.append(make_image(image_id, histograms))
        scaled.append(make_image(image_id, [{c: 4 * n for c, n in h.items()} for h in histograms]))

    labelings = [rng.integers(0, 3, size=5) for _ in images]
    assert fs_loss(labelings, make_dataset(images, 3)) == pytest.approx(
        fs_loss(labelings, make_dataset(scaled, 3))
    )


def test_fs_loss_weak(dataset):
    with pytest.raises(UnsupportedSupervision):
        fs_loss([np.array([0, 1, 0])], to_weak(dataset))


def test_fs_loss_no_pixels():
    with pytest.raises(UndefinedRatio):
        fs_loss([], make_dataset([], class_count=2))


def test_fs_loss_labeling_length(dataset):
    with pytest.raises(DimensionMismatch) as e:
        fs_loss([np.array([0, 1])], dataset)

    assert str(e.value) == "Labeling of image 0 has 2 superpixels, expected 3."


def test_fs_loss_labeling_count(dataset):
    with pytest.raises(DimensionMismatch):
        fs_loss([], dataset)


@pytest.fixture()
def two_images():
    """Image 0 has labels {0, 1}, image 1 only {0}."""
    return make_dataset(
        [make_image(0, [{0: 5}, {1: 5}]), make_image(1, [{0: 5}, {0: 5}])], class_count=3
    )


def test_ws_loss_hand_count(two_images):
    # Image 0 misses class 0, which occurs in 2 images.
    labelings = [np.array([1, 1]), np.array([0, 0])]
    assert ws_loss(labelings, two_images) == pytest.approx(0.5)
    assert ws_class_mismatches(labelings, two_images).tolist() == [1, 0, 0]


def test_ws_loss_unlabeled_class(two_images):
    """A class that is in no image label set doesn't count."""
    labelings = [np.array([0, 1]), np.array([0, 2])]
    assert ws_loss(labelings, two_images) == 0.0
    assert ws_class_mismatches(labelings, two_images).tolist() == [0, 0, 1]


def test_ws_loss_weak_dataset(two_images):
    labelings = [np.array([0, 0]), np.array([1, 1])]
    # Class 0 is missing in image 1 (1/2), class 1 is missing in image 0
    # and spurious in image 1 (2/1).
    assert ws_loss(labelings, to_weak(two_images)) == pytest.approx(2.5)


def test_output_label_matrix():
    matrix = output_label_matrix([np.array([2, 2, 0]), np.array([1])], class_count=3)
    assert matrix.tolist() == [[True, False, True], [False, True, False]]


def test_lookup_tables(two_images):
    tables = LookupTables.from_dataset(two_images)
    assert tables.class_pixels.tolist() == [15, 5, 0]
    assert tables.image_label_counts.tolist() == [2, 1, 0]
    assert LookupTables.from_dataset(to_weak(two_images)).histograms == ()


class TestLossEvaluator:
    def test_matches_label_dataset(self, rng):
        dataset = random_dataset(rng, class_count=4)
        scores = random_scores(rng, dataset)
        evaluator = LossEvaluator(dataset, scores, LossKind.FULLY_SUPERVISED)
        for _ in range(5):
            params = CalibrationParams(a=rng.uniform(-12, -2, 4), b=rng.uniform(-10, 10, 4))
            labelings = label_dataset(dataset, scores, params)
            for cached, direct in zip(evaluator.label_all(params), labelings):
                np.testing.assert_array_equal(cached, direct)
            assert evaluator(params) == fs_loss(labelings, dataset)

        assert evaluator.evaluations == 5

    def test_column_cache(self, rng):
        dataset = random_dataset(rng, class_count=2)
        evaluator = LossEvaluator(dataset, random_scores(rng, dataset), LossKind.WEAKLY_SUPERVISED)
        first = evaluator.calibrated_columns(1, -7.0, 0.0)
        assert evaluator.calibrated_columns(1, -7.0, 0.0) is first
        assert evaluator.calibrated_columns(1, -7.0, 1.0) is not first

    def test_column_cache_evicts(self, rng):
        dataset = random_dataset(rng, class_count=2)
        evaluator = LossEvaluator(dataset, random_scores(rng, dataset), LossKind.WEAKLY_SUPERVISED)
        first = evaluator.calibrated_columns(0, -7.0, 0.0)
        for b in (1.0, 2.0, 3.0, 4.0):
            evaluator.calibrated_columns(1, -7.0, b)

        assert evaluator.calibrated_columns(0, -7.0, 0.0) is not first

    def test_column_cache_size(self):
        assert column_cache_size(21, grid_points=10) == 52
        assert column_cache_size(3) == 6
        with override_settings(REGIONCAL_COLUMN_CACHE_SIZE=1024):
            assert column_cache_size(21, grid_points=10) == 1024

    def test_parallel(self, rng):
        dataset = random_dataset(rng, class_count=3, images=8)
        scores = random_scores(rng, dataset)
        params = CalibrationParams.constant(3)
        assert evaluate_loss(dataset, scores, params, LossKind.FULLY_SUPERVISED) == evaluate_loss(
            dataset, scores, params, LossKind.FULLY_SUPERVISED, jobs=4
        )

    def test_score_shape(self, rng):
        dataset = random_dataset(rng, class_count=3)
        scores = random_scores(rng, dataset)
        scores[2] = scores[2][:, :2]
        with pytest.raises(DimensionMismatch) as e:
            LossEvaluator(dataset, scores, LossKind.FULLY_SUPERVISED)

        assert "Score matrix of image 2" in str(e.value)

    def test_weak_dataset_fs_loss(self, rng):
        dataset = to_weak(random_dataset(rng, class_count=3))
        with pytest.raises(UnsupportedSupervision):
            LossEvaluator(dataset, random_scores(rng, dataset), LossKind.FULLY_SUPERVISED)

    def test_param_count(self, rng):
        dataset = random_dataset(rng, class_count=3)
        evaluator = LossEvaluator(dataset, random_scores(rng, dataset), LossKind.FULLY_SUPERVISED)
        with pytest.raises(DimensionMismatch):
            evaluator(CalibrationParams.constant(2))


def test_label_dataset_count(rng):
    dataset = random_dataset(rng, class_count=3)
    with pytest.raises(DimensionMismatch):
        label_dataset(dataset, [], CalibrationParams.constant(3))
