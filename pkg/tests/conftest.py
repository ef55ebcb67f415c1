import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hjhomog.core import PeriodicGrid

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid256():
    return PeriodicGrid(1, 256)


@pytest.fixture(scope="session")
def grid64():
    return PeriodicGrid(1, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
