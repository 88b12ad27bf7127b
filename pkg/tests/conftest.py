import numpy as np
import pytest

from models.params import SystemParams


@pytest.fixture
def rng():
    return np.random.default_rng(20250101)


@pytest.fixture
def two_equal():
    return SystemParams(masses=(1.0, 1.0))


@pytest.fixture
def three_equal():
    return SystemParams(masses=(1.0, 1.0, 1.0))
