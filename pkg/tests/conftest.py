import numpy as np
import pytest

from greedycond import greedy
from greedycond.jointmodel import brownian_restriction_model


@pytest.fixture(scope="session")
def bm_model():
    """Brownian motion on [0, 1] (201 points) observed on [1/2, 1] (101 points)."""
    return brownian_restriction_model(0.0)


@pytest.fixture(scope="session")
def bm_greedy(bm_model):
    state = greedy.init(bm_model.k_yy, bm_model.grid_y, check_bound=True)
    return greedy.run(state, 100)


def brownian_paths(times, n, rng):
    """Brownian paths at sorted ``times`` from summed Gaussian increments."""
    dt = np.diff(np.concatenate([[0.0], times]))
    return np.cumsum(rng.standard_normal((n, len(times))) * np.sqrt(dt), axis=1)
