import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from llhomotopy.functions import BinaryIndicator, BoxIndicator, L1Norm, ScaledL0, ZeroFunction
from llhomotopy.oracle import Grid1D

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ALL_FUNCTIONS = {
    "binary": BinaryIndicator(),
    "l0": ScaledL0(1.0),
    "box": BoxIndicator(0.0, 1.0),
    "l1": L1Norm(0.7),
    "zero": ZeroFunction(),
}


@pytest.fixture(params=sorted(ALL_FUNCTIONS))
def named_function(request):
    return request.param, ALL_FUNCTIONS[request.param]


@pytest.fixture(scope="session")
def grids():
    """Default oracle grids of every test function, sampled once."""
    return {k: Grid1D.sample(f.eval_1d) for k, f in ALL_FUNCTIONS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
