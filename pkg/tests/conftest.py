import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ALL_FRAMES = [
    ("bernoulli", {}),
    ("gaussian_known_sd", {"sigma": 1.5}),
    ("poisson", {}),
    ("exponential", {}),
    ("gaussian_zero_mean", {}),
    ("pareto", {"m": 1.0}),
    ("beta", {}),
    ("dirichlet", {"d": 4}),
    ("gaussian", {}),
    ("von_mises", {}),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
