import pytest

from regioncal.calibration.descent import coordinate_descent
from regioncal.calibration.joint import joint_calibrate
from regioncal.calibration.losses import evaluate_loss
from regioncal.calibration.platt import platt_calibrate
from regioncal.calibration.sigmoid import CalibrationParams, GridSpec
from regioncal.datasets import to_weak
from regioncal.svm import assemble_training_set_fs
from regioncal.types import LossKind
from tests.utils import make_dataset, make_image, random_dataset, random_scores

FS = LossKind.FULLY_SUPERVISED
SMALL_GRID = GridSpec(points=5)


def test_single_class(rng):
    """With one class every labeling is perfect, so nothing changes."""
    dataset = make_dataset([make_image(0, [{0: 5}, {0: 3}])], class_count=1)
    result = joint_calibrate(dataset, [rng.normal(size=(3, 1))])

    assert result.trace == []
    assert result.final_loss == 0.0
    assert result.sweeps == 1
    assert result.params == CalibrationParams.constant(1)


def test_suppressed_class(suppression):
    """Calibration lets the rare class win its superpixels back from the background."""
    dataset, scores = suppression
    grid = GridSpec()
    uncalibrated = evaluate_loss(dataset, scores, grid.initial_params(2), FS)
    result = joint_calibrate(dataset, scores, grid=grid)

    assert 1 - uncalibrated == pytest.approx(0.6)
    assert 1 - result.final_loss == pytest.approx((360 / 370 + 1.0) / 2)
    assert (1 - result.final_loss) - (1 - uncalibrated) > 0.05
    assert result.loss_kind is FS
    assert result.initial_loss == pytest.approx(uncalibrated)

    # The first step lowers the slope of the background class.
    first = result.trace[0]
    assert (first.class_id, first.parameter, first.old) == (0, "a", -7.0)
    assert first.new == pytest.approx(grid.a_values[8])


def test_better_than_platt(suppression):
    dataset, scores = suppression
    platt = platt_calibrate(dataset, scores, assemble_training_set_fs(dataset))
    platt_loss = evaluate_loss(dataset, scores, platt.params, FS)
    joint = joint_calibrate(dataset, scores)

    assert platt.method == "platt"
    assert platt_loss - joint.final_loss > 0.05


def test_never_worse(rng):
    for _ in range(10):
        dataset = random_dataset(rng, class_count=3, images=4, superpixels=5)
        scores = random_scores(rng, dataset, ties=bool(rng.integers(2)))
        result = joint_calibrate(dataset, scores, grid=SMALL_GRID)

        assert result.final_loss <= result.initial_loss
        assert result.final_loss == evaluate_loss(dataset, scores, result.params, FS)
        losses = [result.initial_loss] + [step.loss for step in result.trace]
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))


def test_line_search_optimum(rng):
    """No single grid step improves the final parameters."""
    dataset = random_dataset(rng, class_count=3, images=5)
    scores = random_scores(rng, dataset)
    result = joint_calibrate(dataset, scores, grid=SMALL_GRID)

    for class_id in range(3):
        for value in SMALL_GRID.a_values:
            params = result.params.replace(class_id, a=value)
            assert evaluate_loss(dataset, scores, params, FS) >= result.final_loss
        for value in SMALL_GRID.b_values:
            params = result.params.replace(class_id, b=value)
            assert evaluate_loss(dataset, scores, params, FS) >= result.final_loss


def test_weak_loss(rng):
    dataset = to_weak(random_dataset(rng, class_count=4, images=6))
    result = joint_calibrate(dataset, random_scores(rng, dataset), grid=SMALL_GRID)

    assert result.loss_kind is LossKind.WEAKLY_SUPERVISED
    assert result.final_loss <= result.initial_loss


def test_parallel(rng):
    dataset = random_dataset(rng, class_count=3, images=8)
    scores = random_scores(rng, dataset)
    serial = joint_calibrate(dataset, scores, grid=SMALL_GRID)
    parallel = joint_calibrate(dataset, scores, grid=SMALL_GRID, jobs=4)

    assert parallel.params == serial.params
    assert parallel.trace == serial.trace


def test_unpack(suppression):
    params, trace = joint_calibrate(*suppression)
    assert params.class_count == 2
    assert trace


class TestCoordinateDescent:
    def test_quadratic(self):
        """A separable bowl is solved in a single sweep, plus the sweep that confirms it."""
        grid = GridSpec(points=11, a_range=(-12.0, -2.0), b_range=(-10.0, 10.0))

        def loss(params):
            return sum((a + 4.0) ** 2 + (b - 2.0) ** 2 for a, b in zip(params.a, params.b))

        result = coordinate_descent(loss, grid.initial_params(2), grid)
        assert result.params == CalibrationParams(a=(-4.0, -4.0), b=(2.0, 2.0))
        assert result.sweeps == 2
        assert result.final_loss == 0.0
        assert [(step.class_id, step.parameter) for step in result.trace] == [
            (0, "a"),
            (0, "b"),
            (1, "a"),
            (1, "b"),
        ]

    def test_first_minimum(self):
        """On ties within a line, the first grid value is taken."""
        grid = GridSpec(points=3, a_range=(-12.0, -2.0), b_range=(-1.0, 1.0), init_a=-7.0)

        def loss(params):
            return 0.0 if params.a[0] != -7.0 else 1.0

        result = coordinate_descent(loss, grid.initial_params(1), grid)
        assert result.params.a == (-12.0,)

    def test_max_sweeps(self):
        grid = GridSpec(points=3)
        calls = []

        def loss(params):
            calls.append(params)
            return -len(calls)  # always improving

        result = coordinate_descent(loss, grid.initial_params(1), grid, max_sweeps=2)
        assert result.sweeps == 2
