import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from SpikeLab.core.exceptions import ParameterDomainError
from SpikeLab.core.params import ModelParams, make_grid
from SpikeLab.modules.innersolve import compute_I, solve_inner, subinner_asymptotics
from SpikeLab.modules.pdesim import SimConfig, run
from SpikeLab.modules.steady import (
    build_steady_state,
    check_center,
    composite_fields,
    far_field_amplitude,
    match_amplitude,
    offcenter_amplitude,
    outer_branch,
    polish_steady_state,
    relax_steady_state,
    tangent_sum,
    write_steady_state,
)


def test_tangent_sum_at_centre():
    assert tangent_sum(0.0, 0.5) == pytest.approx(2.0 * math.tan(0.5), rel=1e-15)


def test_matched_amplitude_solves_flux_balance(matched):
    assert matched.residual < 1e-10
    assert 1e-3 < matched.S < 0.9
    lhs = 1e-2 * 1.0 * compute_I(matched.inner, 1.0)
    rhs = matched.S * 0.5 * 1.0 * tangent_sum(0.0, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_offcenter_amplitude_is_even_in_center():
    left = offcenter_amplitude(-0.3, 1e-2, 1.0, 0.25, 0.5)
    right = offcenter_amplitude(0.3, 1e-2, 1.0, 0.25, 0.5)
    assert left.S == pytest.approx(right.S, rel=1e-12)


def test_check_center_rejects_unreachable_positions():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=1e-2)
    check_center(0.5, params)
    with pytest.raises(ParameterDomainError):
        check_center(0.99, params)
    with pytest.raises(ParameterDomainError):
        check_center(1.0, ModelParams(a=1.0, b=0.25, theta=0.5, epsilon=1e-2))


def test_outer_branch_is_continuous_at_center():
    left = outer_branch(np.array([0.2 - 1e-12]), 0.2, 0.3, 0.5)[0]
    right = outer_branch(np.array([0.2]), 0.2, 0.3, 0.5)[0]
    assert left == pytest.approx(0.3, rel=1e-9)
    assert right == pytest.approx(0.3, rel=1e-12)


def test_centered_steady_state_is_even_and_peaked():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=1e-2)
    grid = make_grid(1600, params.epsilon)
    ss = build_steady_state(params, grid)
    assert np.max(np.abs(ss.k_s - ss.k_s[::-1])) <= 1e-10
    assert abs(grid.x[np.argmax(ss.k_s)]) <= grid.dx
    assert ss.far_field_gap() < 1e-6
    assert far_field_amplitude(ss.fields, grid, params, 0.0) == pytest.approx(ss.S, rel=1e-6)


def test_composite_fields_reduce_to_outer_branch_far_away(matched):
    x = np.array([-0.9, 0.9])
    l, k = composite_fields(x, 0.0, matched.S, matched.inner, 1e-2, 1.0, 1.0)
    expected = outer_branch(x, 0.0, matched.S, 1.0)
    np.testing.assert_allclose(l, expected, rtol=1e-8)
    np.testing.assert_allclose(k, expected, rtol=1e-8)


def test_write_steady_state(tmp_path):
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=2e-2)
    ss = build_steady_state(params, make_grid(800, params.epsilon))
    csv_path, meta_path = write_steady_state(ss, tmp_path, "centered")
    assert csv_path.read_text().splitlines()[0] == "x,l_s,k_s"
    meta = json.loads(meta_path.read_text())
    assert meta["n"] == 800
    assert meta["S"] == pytest.approx(ss.S)


@pytest.mark.slow
def test_newton_polish_stays_close_to_composite():
    params = ModelParams(a=1.0, b=0.25, theta=0.5, epsilon=2e-2)
    ss = build_steady_state(params, make_grid(800, params.epsilon))
    polished = polish_steady_state(ss)
    assert polished.S == pytest.approx(ss.S, rel=0.1)
    assert np.max(np.abs(polished.k_s - polished.k_s[::-1])) < 1e-8


def _ladder_root(epsilon, a, b, theta, x0):
    flux = 0.5 * math.sqrt(a * b) * tangent_sum(x0, math.sqrt(a * b))

    def residual(S):
        return epsilon * b * compute_I(solve_inner(S, theta), a) - S * flux

    ladder = np.logspace(math.log10(epsilon / 10.0), math.log10(0.9), 40)
    values = [residual(S) for S in ladder]
    for lo, hi, r_lo, r_hi in zip(ladder, ladder[1:], values, values[1:]):
        if r_lo * r_hi < 0.0:
            return brentq(residual, lo, hi, xtol=1e-14, rtol=1e-13)
    raise AssertionError("no sign change on the amplitude ladder")


@pytest.mark.parametrize("x0", [0.0, 0.5])
def test_matching_agrees_with_ladder_bracketed_root(x0):
    expected = _ladder_root(1e-2, 1.0, 0.25, 0.5, x0)
    found = match_amplitude(1e-2, 1.0, 0.25, 0.5) if x0 == 0.0 else offcenter_amplitude(x0, 1e-2, 1.0, 0.25, 0.5)
    assert found.S == pytest.approx(expected, rel=1e-5)


def _subinner_gap(epsilon, a, b, theta):
    S_match = match_amplitude(epsilon, a, b, theta).S
    return abs(S_match - subinner_asymptotics(epsilon, a, b, theta).S) / S_match


def test_subinner_gap_closes_as_epsilon_drops():
    gaps = [_subinner_gap(eps, 1.0, 0.25, 0.5) for eps in (2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3)]
    assert np.all(np.diff(gaps) < 0.0)


def test_subinner_gap_widens_with_theta():
    gaps = [_subinner_gap(2.5e-3, 1.0, 1.0, theta) for theta in (0.1, 0.4, 0.7)]
    assert np.all(np.diff(gaps) > 0.0)


@pytest.mark.slow
def test_composite_relaxes_onto_newton_steady_state():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=2e-2, tau=0.3)
    grid = make_grid(800, params.epsilon)
    traj = run(SimConfig(params=params, grid=grid, t_end=50.0, track_every=1.0, initial={"type": "steady", "x0": 0.0}))
    heights = traj.track("height_k")[traj.track("t") >= 40.0]
    assert (heights.max() - heights.min()) / heights.mean() < 1e-3
    newton = relax_steady_state(params, grid)
    assert heights[-1] == pytest.approx(newton.xi, rel=1e-3)
