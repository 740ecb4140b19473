import os
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.config import Settings
from app.core.dataset_builder import TrainingTensors, build_dataset
from app.core.feature_extractor import FeatureExtractor
from app.core.samples import Image, LabelMap
from app.core.segmenter import train_clean_segmenter
from app.core.shapes import generate_toy_dataset
from app.models.dataset import ToyDatasetConfig
from app.models.degradation import DegradationFamily, DegradationSpec
from app.models.training import NetworkSettings, TrainingConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: toy-scale acceptance runs (set RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_image(height: int, width: int, seed: int = 0) -> Image:
    return Image(np.random.default_rng(seed).uniform(0.0, 1.0, size=(height, width, 3)))


def random_labels(height: int, width: int, num_classes: int, seed: int = 0) -> LabelMap:
    return LabelMap(np.random.default_rng(seed).integers(0, num_classes, size=(height, width)), num_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_extractor():
    return FeatureExtractor.random_pyramid(seed=5, widths=(4, 8))


@pytest.fixture
def tiny_config():
    return TrainingConfig(
        n1=3,
        n2=3,
        n3=3,
        batch_size=2,
        seed=0,
        checkpoint_interval=0,
        networks=NetworkSettings(
            generator_width=4,
            generator_depth=2,
            discriminator_width=4,
            discriminator_blocks=2,
        ),
    )


@pytest.fixture
def tiny_tensors():
    g = torch.Generator().manual_seed(0)
    n, k, size = 6, 3, 16
    return TrainingTensors(
        degraded=torch.rand(n, 3, size, size, generator=g),
        degraded_seg=torch.randint(0, k, (n, size, size), generator=g),
        gt_image=torch.rand(n, 3, size, size, generator=g),
        gt_seg=torch.randint(0, k, (n, size, size), generator=g),
        num_classes=k,
    )


TOY = ToyDatasetConfig(n_samples=6, image_size=32, num_classes=4, n_val=2, seed=3)
TOY_SPECS = [
    DegradationSpec(family=DegradationFamily.GAUSSIAN_BLUR, severity_index=1, seed=11),
    DegradationSpec(family=DegradationFamily.GAUSSIAN_NOISE, severity_index=1, seed=12),
]


@pytest.fixture(scope="session")
def toy_pairs():
    return generate_toy_dataset(TOY)


@pytest.fixture(scope="session")
def untrained_segmenter(toy_pairs):
    return train_clean_segmenter(toy_pairs, epochs=0, seed=0)


@pytest.fixture(scope="session")
def toy_dataset_dir(tmp_path_factory, toy_pairs, untrained_segmenter):
    out = tmp_path_factory.mktemp("toy_data")
    build_dataset(TOY, TOY_SPECS, untrained_segmenter, out, pairs=toy_pairs)
    return out


@pytest.fixture
def test_settings(tmp_path):
    return Settings(output_root=str(tmp_path), feature_extractor="random", feature_extractor_seed=5, _env_file=None)
