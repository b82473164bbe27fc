import numpy as np
import pytest
from hypothesis import strategies as st

from lrfput.potentials import PotentialFamily
from lrfput.profiles import Grid, Profile, normalize_to
from lrfput.solver import SolverConfig, solve

SMALL = Grid(4, 3.0)


def cone_profile(half, grid=SMALL, K=None):
    """Even, nonincreasing, nonnegative profile from arbitrary half-samples."""
    h = np.sort(np.abs(np.asarray(half, dtype=float)))[::-1]
    n_half = grid.N + 1
    h = np.concatenate([h, np.zeros(max(0, n_half - h.size))])[:n_half]
    W = Profile(grid, np.concatenate([h[:0:-1], h]))
    return normalize_to(W, K) if K is not None else W


half_samples = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=SMALL.N + 1,
                        max_size=SMALL.N + 1).filter(lambda v: max(v) > 1e-3)


@pytest.fixture(scope="session")
def inverse_square():
    return PotentialFamily(alpha=2.0)


@pytest.fixture(scope="session")
def default_solution(inverse_square):
    return solve(SolverConfig(K=0.2), inverse_square)


@pytest.fixture(scope="session")
def lattice_solution(inverse_square):
    return solve(SolverConfig(K=0.3), inverse_square)
