from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from vnflow import delta0_estimate, expand, make_flow, make_roof

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

ALPHAS = {
    "golden": "golden",
    "sqrt2m1": "sqrt2m1",
    "cf123": {"quotients": [], "periodic": [1, 2, 3]},
}
DEMO_G = [(1, 0.0, 0.05)]


@pytest.fixture(scope="session")
def golden():
    return expand("golden", 40)


@pytest.fixture(scope="session", params=list(ALPHAS))
def any_cf(request):
    return expand(ALPHAS[request.param], 40)


@pytest.fixture(scope="session")
def demo_roof():
    return make_roof(DEMO_G, 1.0, 0.7)


@pytest.fixture(scope="session")
def demo_flow(demo_roof, golden):
    return make_flow(demo_roof, golden)


@pytest.fixture(scope="session")
def linear_flow(golden):
    return make_flow(make_roof([], 1.0, 0.7), golden)


@pytest.fixture(scope="session")
def demo_delta0(demo_flow):
    return delta0_estimate(demo_flow, 1.0)


@pytest.fixture(scope="session")
def configs_dir():
    return Path(__file__).resolve().parent.parent / "configs"
