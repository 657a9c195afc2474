"""Test configuration and fixtures."""

import os

import numpy as np
import pytest

from src.tt_contrastive.config import AugmentConfig, ModelConfig
from src.tt_contrastive.dataset import ABBREVIATIONS, NUM_CLASSES, Dataset, Sample, gen_synthetic
from src.tt_contrastive.tensor import set_accumulate_dtype, set_num_threads


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long acceptance experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance experiment (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def setup_test_env(tmp_path):
    """Set up test environment variables."""
    # Save original environment
    original_env = dict(os.environ)

    for key in [k for k in os.environ if k.startswith('TTC_')]:
        del os.environ[key]
    os.environ.update({
        'TTC_OUTPUT_DIR': str(tmp_path / 'runs'),
        'TTC_THREADS': '1',
        'TTC_SEED': '0',
    })

    yield

    # Restore original environment and runtime knobs
    os.environ.clear()
    os.environ.update(original_env)
    set_num_threads(1)
    set_accumulate_dtype("float64")


@pytest.fixture
def tiny_model_config():
    """Model small enough to train in milliseconds: 8 features, head 16-8-4."""
    return ModelConfig(stem_channels=4, stages=((1, 4),), kernel=3, head=(16, 8, 4),
                       in_split=(2, 4), out_split=(4, 4), bond=2)


@pytest.fixture
def tiny_augment_config():
    return AugmentConfig(output_size=(8, 8))


@pytest.fixture
def tiny_dataset():
    """Six random 16x16 images, one per class 0..5."""
    rng = np.random.default_rng(7)
    samples = []
    for label in range(6):
        abbreviation = ABBREVIATIONS[label % NUM_CLASSES]
        samples.append(Sample(rng.random((16, 16, 3)).astype(np.float32), label,
                              f"{abbreviation}/{abbreviation}_{label:04d}.ppm", (16, 16)))
    return Dataset(samples)


@pytest.fixture
def synthetic_root(tmp_path):
    """Synthetic CCSN tree with two 16x16 images per class."""
    root = tmp_path / "ccsn"
    gen_synthetic(root, num_per_class=2, size=16, seed=0)
    return root
