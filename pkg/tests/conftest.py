import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from induced_ulam import canonical_lsv
from induced_ulam.discretization import assemble
from induced_ulam.inducing import build_induced
from induced_ulam.solver import stationary

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def lsv05():
    return canonical_lsv(0.5)


@pytest.fixture(scope="session")
def induced05(lsv05):
    return build_induced(lsv05)


@pytest.fixture(scope="session")
def solved05(induced05):
    """Stationary density for alpha = 1/2 on a 256-cell mesh."""
    matrix = assemble(induced05, 256)
    return matrix, stationary(matrix, 1e-13)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
