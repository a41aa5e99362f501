import pytest
from hypothesis import HealthCheck, settings

from sdtails.core_model import (
    AntiCorrelated,
    Bivariate,
    Conditional,
    Independent,
    LegParams,
    QuotientModel,
)

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")

# sigma0 = 2 gives a unit Brownian standard deviation at dt = 1.
JUMP_LEG = LegParams(1.0, 2.0, 0.1, 0.5)


@pytest.fixture
def cauchy_model():
    return QuotientModel(LegParams(0.0, 2.0), LegParams(0.0, 2.0), Independent(0.0, 0.0), Conditional(0.0))


@pytest.fixture
def general_model():
    return QuotientModel(JUMP_LEG, JUMP_LEG, Independent(0.5, 0.5), Conditional(0.4))


@pytest.fixture
def bivariate_model():
    return QuotientModel(JUMP_LEG, JUMP_LEG, Bivariate(0.3, 0.3, 0.2), Conditional(0.3))


@pytest.fixture
def anti_model():
    return QuotientModel(JUMP_LEG, LegParams(1.0, 2.0, -0.1, 0.5), Independent(0.5, 0.5), AntiCorrelated())
