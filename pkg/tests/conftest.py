import numpy as np
import pytest

from choqflow.grid import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1d():
    return GridSpec(1, 256, 32.0)


@pytest.fixture
def grid3d_small():
    return GridSpec(3, 16, 8.0)
