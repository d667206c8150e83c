import numpy as np
import pytest
import torch

from lfgen.synthetic import synthetic_lightfield

# keep CPU runs reproducible and fast
torch.manual_seed(0)


@pytest.fixture(scope="session")
def small_field():
    """Grayscale 5x5x40x40 synthetic field with mild parallax."""
    return synthetic_lightfield(angular=5, height=40, width=40, seed=11)


@pytest.fixture(scope="session")
def rgb_field():
    return synthetic_lightfield(angular=5, height=32, width=32, channels=3, seed=4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def random_lightfield(rng, angular=5, height=32, width=32, channels=1):
    from lfgen.lightfield import LightField

    data = rng.random((angular, angular, height, width, channels), dtype=np.float64)
    return LightField.from_array(data)
