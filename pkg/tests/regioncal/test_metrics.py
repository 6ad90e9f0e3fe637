import numpy as np
import pytest

from regioncal.calibration.losses import LookupTables, fs_loss, ws_loss
from regioncal.datasets import to_weak
from regioncal.exceptions import UnsupportedSupervision
from regioncal.metrics import confusion_matrix, evaluate, evaluate_weak
from tests.utils import make_dataset, make_image, random_dataset


@pytest.fixture()
def dataset():
    return make_dataset([make_image(0, [{0: 100}, {1: 30}, {1: 20}])], class_count=3)


def test_perfect(small_dataset):
    labelings = [
        np.array([sp.majority_class for sp in image.superpixels]) for image in small_dataset.images
    ]
    report = evaluate(labelings, small_dataset)

    assert report.class_average_accuracy == 1.0
    assert report.global_accuracy == 1.0
    assert report.loss == 0.0


def test_hand_count(dataset):
    report = evaluate([np.array([0, 1, 0])], dataset)

    assert report.class_accuracies == (1.0, 0.6, None)
    assert report.class_average_accuracy == pytest.approx(0.8)
    assert report.global_accuracy == pytest.approx(130 / 150)
    assert report.class_pixels == (100, 50, 0)
    assert report.confusion.tolist() == [[100, 0, 0], [20, 30, 0], [0, 0, 0]]


def test_as_dict(dataset):
    data = evaluate([np.array([0, 1, 0])], dataset).as_dict()

    assert data["kind"] == "full"
    assert data["classes"][2] == {"class_id": 2, "accuracy": None, "pixels": 0}
    assert data["confusion"][1] == [20, 30, 0]


def test_loss_identity(rng):
    dataset = random_dataset(rng, class_count=4, images=5, superpixels=6)
    for _ in range(5):
        labelings = [rng.integers(0, 4, size=6) for _ in dataset.images]
        report = evaluate(labelings, dataset)
        assert report.class_average_accuracy == 1.0 - fs_loss(labelings, dataset)
        assert report.loss == pytest.approx(fs_loss(labelings, dataset))


def test_confusion_rows(rng):
    """Row sums are the ground-truth pixels, the total is the dataset area."""
    dataset = random_dataset(rng, class_count=5, images=4, superpixels=7)
    labelings = [rng.integers(0, 5, size=7) for _ in dataset.images]
    tables = LookupTables.from_dataset(dataset)
    confusion = confusion_matrix(labelings, tables)

    np.testing.assert_array_equal(confusion.sum(axis=1), tables.class_pixels)
    assert confusion.sum() == sum(image.area for image in dataset.images)


def test_evaluate_weak_dataset(dataset):
    with pytest.raises(UnsupportedSupervision):
        evaluate([np.array([0, 1, 0])], to_weak(dataset))


class TestEvaluateWeak:
    @pytest.fixture()
    def two_images(self):
        """Image 0 has labels {0, 1}, image 1 only {0}."""
        return to_weak(
            make_dataset(
                [make_image(0, [{0: 5}, {1: 5}]), make_image(1, [{0: 5}, {0: 5}])],
                class_count=3,
            )
        )

    def test_precision_recall(self, two_images):
        labelings = [np.array([1, 1]), np.array([0, 0])]
        report = evaluate_weak(labelings, two_images)

        assert report.true_positives == (1, 1, 0)
        assert report.false_positives == (0, 0, 0)
        assert report.false_negatives == (1, 0, 0)
        assert report.precision == (1.0, 1.0, None)
        assert report.recall == (0.5, 1.0, None)
        assert report.hamming_loss == pytest.approx(0.5)

    def test_spurious_class(self, two_images):
        labelings = [np.array([0, 1]), np.array([2, 2])]
        report = evaluate_weak(labelings, two_images)

        assert report.false_positives == (0, 0, 1)
        assert report.precision == (1.0, 1.0, 0.0)
        assert report.recall == (0.5, 1.0, None)

    def test_hamming_equals_loss(self, rng):
        dataset = to_weak(random_dataset(rng, class_count=4, images=6))
        labelings = [rng.integers(0, 4, size=6) for _ in dataset.images]
        assert evaluate_weak(labelings, dataset).hamming_loss == ws_loss(labelings, dataset)

    def test_as_dict(self, two_images):
        data = evaluate_weak([np.array([1, 1]), np.array([0, 0])], two_images).as_dict()
        assert data["kind"] == "weak"
        assert data["classes"][0]["recall"] == 0.5
