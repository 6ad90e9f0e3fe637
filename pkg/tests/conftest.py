import django
import numpy as np
import pytest

from regioncal import conf
from regioncal.datasets import SyntheticConfig, generate_synthetic
from tests.utils import suppression_dataset


def pytest_configure():
    print(f"Running with Django {django.__version__}, numpy {np.__version__}")
    print(f"Using REGIONCAL_JOBS={conf.REGIONCAL_JOBS}")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20201012)


@pytest.fixture(scope="session")
def small_config() -> SyntheticConfig:
    return SyntheticConfig(
        class_count=3,
        images=8,
        superpixels_per_image=10,
        feature_dim=4,
        run_length=3.0,
        cluster_separation=6.0,
        noise_sigma=0.3,
        seed=7,
    )


@pytest.fixture(scope="session")
def small_dataset(small_config):
    """A small, well separated fully supervised dataset."""
    return generate_synthetic(small_config)


@pytest.fixture()
def suppression():
    """The background/rare scenario, as ``(dataset, scores)``."""
    return suppression_dataset()


@pytest.fixture()
def dataset_file(tmp_path, small_dataset):
    from regioncal.datasets import save_dataset

    path = tmp_path.joinpath("train.rds.jsonl")
    save_dataset(small_dataset, path)
    return path
