import numpy as np
import pytest

from inv_transfer.transforms2d.assets import LabeledImageSet, generate_synthetic_base
from inv_transfer.transforms2d.dataset import AssetConfig, DatasetConfig
from inv_transfer.transforms2d.transforms import Sprite, TransformSet


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the long experiment reproductions')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running protocol reproduction')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_assets():
    return AssetConfig(sprite_count=12, background_count=8)


@pytest.fixture
def small_config(small_assets):
    return DatasetConfig(objects=(0, 1, 2), transforms=TransformSet(('rotate', 'hue')),
                         n_train=24, n_val=8, n_test=8, seed=3, assets=small_assets)


@pytest.fixture
def opaque_sprite():
    rng = np.random.RandomState(0)
    pixels = rng.randint(0, 256, (8, 8, 4)).astype(np.uint8)
    pixels[..., 3] = 255
    return Sprite(pixels)


@pytest.fixture
def base_set():
    return generate_synthetic_base(60, seed=4)


@pytest.fixture
def tiny_base():
    images = np.arange(4 * 16 * 16 * 3, dtype=np.uint64).reshape(4, 16, 16, 3) % 251
    return LabeledImageSet(images.astype(np.uint8), np.array([0, 1, 2, 3]), 4)
