import math

import pytest
from hypothesis import HealthCheck, settings

from exceptional_domains.geometry import DomainSpec
from exceptional_domains.solver import solve_dirichlet

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def straight_solves():
    """Default-grid solves of the straight cylinder, n = 4, 5, 6, T = 2 pi."""
    out = {}
    for n in (4, 5, 6):
        spec = DomainSpec(n, 2.0 * math.pi)
        out[n] = (spec, solve_dirichlet(spec))
    return out
