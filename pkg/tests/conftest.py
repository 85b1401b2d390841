import numpy as np
import pytest

from SpikeLab.core.params import FieldPair, ModelParams, make_grid
from SpikeLab.modules.innersolve import solve_inner
from SpikeLab.modules.stability import build_nlep_context
from SpikeLab.modules.steady import match_amplitude


@pytest.fixture(scope="session")
def inner_profile():
    return solve_inner(0.1, 0.5)


@pytest.fixture(scope="session")
def matched():
    return match_amplitude(1e-2, 1.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def nlep_ctx(matched):
    return build_nlep_context(1e-2, 1.0, 1.0, 0.5, inner=matched.inner)


@pytest.fixture
def smooth_state():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.1, tau=0.7)
    grid = make_grid(40)
    u = FieldPair(l=1.0 + 0.3 * np.cos(np.pi * grid.x), k=1.0 + 0.5 * np.exp(-grid.x ** 2 / 0.1))
    return params, grid, u
