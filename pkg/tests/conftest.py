import numpy as np
import pytest

from pinned_gl import symmetric_scene, two_pair_scene


@pytest.fixture(scope="session")
def sym():
    return symmetric_scene()


@pytest.fixture(scope="session")
def two_pair():
    return two_pair_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
