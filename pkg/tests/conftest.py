import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from physvac.geometry import Grid
from physvac.weights import build_weight

settings.register_profile(
    "physvac", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("physvac")


@pytest.fixture
def small_grid():
    return Grid(8, 8, 24)


@pytest.fixture
def parabolic(small_grid):
    return build_weight("parabolic", 2.0, small_grid)


def smooth_map(grid, eps=0.05, phase=0.0):
    """Non-separable periodic displacement used across the tests."""
    x1, x2, x3 = grid.x1 + phase, grid.x2, grid.x3
    tp = 2 * np.pi
    return eps * np.stack(np.broadcast_arrays(
        np.sin(tp * x1) * np.cos(tp * x2) * x3 * (1 - x3),
        np.cos(tp * x1) * np.sin(np.pi * x3) + 0 * x2,
        np.sin(tp * x1) * np.sin(tp * x2) * x3 ** 2,
    )).astype(float)


def order(sizes, errors):
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])
