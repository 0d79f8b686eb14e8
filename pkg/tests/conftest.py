import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dynpg.liealg import build_algebra

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sl2():
    return build_algebra("A", 1)


@pytest.fixture(scope="session")
def sl3():
    return build_algebra("A", 2)


@pytest.fixture(scope="session")
def sl4():
    return build_algebra("A", 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
