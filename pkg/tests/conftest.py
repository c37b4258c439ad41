import numpy as np
import pytest

from patchenhance.imagedata import ImageRecord


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_image(rng, side=64):
    return ImageRecord(pixels=rng.random((side, side, 3)).astype(np.float32))


@pytest.fixture
def image_64(rng):
    return random_image(rng, 64)


@pytest.fixture
def image_512(rng):
    return random_image(rng, 512)
