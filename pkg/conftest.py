import numpy as np
import pytest
from scipy.stats import ortho_group

from src.classes.CriticalFinder import SearchConfig, find_critical_points
from src.classes.ScalarField import parse_field
from src.classes.SphereModel import RoundSphereModel

QUADRIC_5 = "3 + x5^2 + 0.5*x4^2 + 0.25*x3^2 + 0.125*x2^2 + 0.0625*x1^2"
AFFINE = "2 + x5"

# fewer starts than the default keep the suites fast; restarts cover misses
TEST_STARTS = 256


@pytest.fixture(scope="session")
def round_s4():
    return RoundSphereModel()


@pytest.fixture(scope="session")
def quadric_5():
    return parse_field(QUADRIC_5)


@pytest.fixture(scope="session")
def affine_field():
    return parse_field(AFFINE)


@pytest.fixture(scope="session")
def search_cfg():
    return SearchConfig(starts=TEST_STARTS, seed=0)


@pytest.fixture(scope="session")
def quadric_set(quadric_5, round_s4, search_cfg):
    return find_critical_points(quadric_5, round_s4, search_cfg)


@pytest.fixture(scope="session")
def affine_set(affine_field, round_s4, search_cfg):
    return find_critical_points(affine_field, round_s4, search_cfg)


@pytest.fixture
def rotation():
    return ortho_group.rvs(5, random_state=np.random.default_rng(7))
