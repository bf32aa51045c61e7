import math
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from melnikov_sign import Parameters, parse  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# (alpha, eta, five initial velocities inside D) for each annulus case
ANNULUS_CASES = {
    "C1": (1.0, 1.0, [0.1, 0.3, 0.5, 0.7, 0.9]),
    "C4": (1.0, 0.0, [0.2, 0.5, 1.0, 2.0, 3.0]),
    "C7": (1.0, -1.0, [0.2, 0.5, 1.0, 2.0, 4.0]),
    "C9": (-1.0, -1.0, [0.2, 0.5, 1.0, 2.0, 4.0]),
}


@pytest.fixture
def p1():
    """alpha = eta = beta = 1, sigma = 2 pi, f = sin(t)."""
    return Parameters(1.0, 1.0, 2 * math.pi), parse("sin(t)")
