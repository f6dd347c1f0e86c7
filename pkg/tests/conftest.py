import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ddlab",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("ddlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
