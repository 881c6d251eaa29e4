import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from weldtrainer.seam import localize_seam
from weldtrainer.sim import preset_scenario

settings.register_profile(
    "suite", deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def perfect_scenario():
    return preset_scenario("perfect")


@pytest.fixture(scope="session")
def perfect_cloud(perfect_scenario):
    cloud, truth = perfect_scenario.build()
    return cloud, truth


@pytest.fixture(scope="session")
def perfect_seam(perfect_cloud):
    cloud, _ = perfect_cloud
    return localize_seam(cloud)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
