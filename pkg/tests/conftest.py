import numpy as np
import pytest

from eulerchannel.geometry import BoundaryProfile, build_grid


@pytest.fixture(scope="session")
def flat_grid():
    return build_grid(BoundaryProfile.flat(), 128, 65)


@pytest.fixture(scope="session")
def flat_grid_small():
    return build_grid(BoundaryProfile.flat(), 64, 33)


@pytest.fixture(scope="session")
def curved_grid():
    return build_grid(BoundaryProfile.cosine(0.1), 128, 65)


@pytest.fixture(scope="session")
def curved_grid_small():
    return build_grid(BoundaryProfile.cosine(0.1), 64, 33)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
