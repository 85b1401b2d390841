import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, fsolve

from SpikeLab.core.exceptions import ParameterDomainError
from SpikeLab.modules.innersolve import (
    FirstIntegral,
    compute_I,
    first_integral_residual,
    kinetic_integral,
    log_sech2,
    sech_core_residual,
    sech_moment,
    solve_inner,
    subinner_amplitude,
    subinner_asymptotics,
    subinner_profile,
    write_profile_csv,
)


def test_first_integral_residual_is_small(inner_profile):
    assert first_integral_residual(inner_profile) <= 1e-8


def test_profile_shape(inner_profile):
    p = inner_profile
    assert p.K0[0] == p.xi
    assert p.K0y[0] == 0.0
    assert np.all(np.diff(p.K0) <= 1e-12 * p.xi)
    np.testing.assert_allclose(p.L0, p.S * np.exp(p.K0 - p.S), rtol=1e-12)
    assert p.K0[-1] - p.S < 1e-9
    assert p.xi > FirstIntegral(p.S, p.theta).turning_point()


def test_evaluate_follows_exponential_tail(inner_profile):
    K, L = inner_profile.evaluate([0.0, inner_profile.Y + 50.0])
    assert K[0] == pytest.approx(inner_profile.xi)
    assert K[1] == pytest.approx(inner_profile.S, abs=1e-12)
    assert L[1] == pytest.approx(inner_profile.S, abs=1e-12)


def test_core_height_and_core_integral_grow_as_amplitude_drops():
    xi = [solve_inner(S, 0.5).xi for S in (0.05, 0.1, 0.2)]
    assert xi[0] > xi[1] > xi[2]
    assert compute_I(solve_inner(0.05, 0.5), 1.0) > compute_I(solve_inner(0.1, 0.5), 1.0)


def test_potential_vanishes_at_core_height(inner_profile):
    W = FirstIntegral(inner_profile.S, inner_profile.theta)
    assert abs(W.potential(inner_profile.xi)) < 1e-10 * inner_profile.xi ** 2
    assert W.potential(inner_profile.S) == 0.0


def test_kinetic_integral_positive(inner_profile):
    assert kinetic_integral(inner_profile) > 0.0


def test_solve_inner_rejects_bad_amplitude():
    with pytest.raises(ParameterDomainError):
        solve_inner(0.0, 0.5)
    with pytest.raises(ParameterDomainError):
        solve_inner(1.2, 0.5)
    with pytest.raises(ParameterDomainError):
        solve_inner(0.1, 1.0)


@pytest.mark.parametrize("p, expected", [(2.0, 1.0), (4.0, 2.0 / 3.0), (8.0, 16.0 / 35.0)])
def test_sech_moments_match_closed_forms(p, expected):
    assert sech_moment(p) == pytest.approx(expected, rel=1e-12)


def test_sech_moment_needs_positive_power():
    with pytest.raises(ParameterDomainError):
        sech_moment(0.0)


def test_sech_core_solves_reduced_equation():
    z = np.linspace(-30.0, 30.0, 121)
    assert np.max(np.abs(sech_core_residual(z))) < 1e-14
    np.testing.assert_allclose(log_sech2(z), np.log(1.0 / np.cosh(z) ** 2), rtol=1e-12, atol=1e-12)


def test_subinner_system_is_self_consistent():
    sol = subinner_asymptotics(1e-3, 1.0, 1.0, 0.5)
    assert sol.S == pytest.approx(subinner_amplitude(sol.xi, 0.5), rel=1e-14)
    assert abs(sol.residual_core) < 1e-10
    assert abs(sol.residual_matching) < 1e-8
    assert sol.xi > 0.0 and 0.0 < sol.S < 1.0


def test_subinner_requires_positive_outer_branch():
    with pytest.raises(ParameterDomainError):
        subinner_asymptotics(1e-3, 2.0, 2.0, 0.5)


def test_write_profile_csv(tmp_path, inner_profile):
    path = write_profile_csv(inner_profile, tmp_path / "profile.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "y,K0,L0"
    assert len(lines) == inner_profile.y.size + 1
    assert math.isclose(float(lines[1].split(",")[1]), inner_profile.xi, rel_tol=1e-11)


def test_subinner_profile_crest():
    K, L = subinner_profile(6.0, 0.01, 0.5, [0.0, 1.0])
    assert K[0] == pytest.approx(6.0)
    assert L[0] == pytest.approx(0.01 * math.exp(6.0 - 0.01))
    assert K[1] < K[0] and L[1] < L[0]


def _shoot(S, theta, xi):
    """+1 if the orbit from the crest overshoots S, -1 if it turns back first."""
    weight = S ** (1.0 - theta)

    def rhs(_, u):
        return [u[1], u[0] - weight * u[0] ** theta * math.exp((1.0 - theta) * (u[0] - S))]

    def below_far_field(_, u):
        return u[0] - S

    def turns_back(_, u):
        return u[1]

    below_far_field.terminal = turns_back.terminal = True
    below_far_field.direction, turns_back.direction = -1, 1
    sol = solve_ivp(rhs, (0.0, 400.0), [xi, 0.0], method="DOP853", rtol=1e-12, atol=1e-14,
                    events=[below_far_field, turns_back])
    assert sol.status == 1
    return 1 if sol.t_events[0].size else -1


def test_core_height_matches_shooting(inner_profile):
    S, theta = inner_profile.S, inner_profile.theta
    weight = S ** (1.0 - theta)
    z_star = brentq(lambda z: z - weight * z ** theta * math.exp((1.0 - theta) * (z - S)), S + 1e-6, 50.0)
    lo, hi = z_star + 1e-3, 2.0 * inner_profile.xi
    assert _shoot(S, theta, lo) == -1 and _shoot(S, theta, hi) == 1
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if _shoot(S, theta, mid) > 0:
            hi = mid
        else:
            lo = mid
    assert inner_profile.xi == pytest.approx(0.5 * (lo + hi), abs=1e-6)


def test_core_integral_matches_quadrature_in_height(inner_profile):
    # y integral rewritten over K = xi - u^2 with dy = dK / |K'| and K'^2 = 2 W(K)
    S, theta, xi, a = inner_profile.S, inner_profile.theta, inner_profile.xi, 1.0
    weight = S ** (1.0 - theta)

    def h(z):
        return z - weight * z ** theta * math.exp((1.0 - theta) * (z - S))

    z_star = brentq(h, S + 1e-6, xi)

    def W(K):
        if K >= z_star:
            return -quad(h, K, xi, epsabs=0.0, epsrel=1e-13)[0]
        return quad(h, S, K, epsabs=0.0, epsrel=1e-13)[0]

    def integrand(u):
        K = xi - u * u
        L = S * math.exp(K - S)
        excess = a * L - L * L - (a * S - S * S)
        return excess * 2.0 * u / math.sqrt(2.0 * W(K))

    expected = -quad(integrand, 0.0, math.sqrt(xi - S), epsabs=0.0, epsrel=1e-10, limit=200)[0]
    assert compute_I(inner_profile, a) == pytest.approx(expected, rel=1e-5)


def test_first_integral_residual_detects_a_shifted_profile(inner_profile):
    shifted = dataclasses.replace(inner_profile, K0=inner_profile.K0 + 1e-3)
    assert first_integral_residual(shifted) > 1e-4


def test_subinner_matches_grid_bracketed_root():
    epsilon, a, b, theta = 1e-2, 1.0, 0.25, 0.5
    root_ab = math.sqrt(a * b)
    moment = sech_moment(4.0 / (1.0 - theta))

    def system(v):
        xi, log_S = v
        core = log_S - (math.log((1.0 - theta) / 2.0) + (2.0 - theta) * math.log(xi)) / (1.0 - theta) + xi
        matching = (math.log(2.0 * epsilon * b * moment / (1.0 - theta)) + log_S - 2.0 * math.exp(log_S)
                    + 2.0 * xi - math.log(xi) - math.log(root_ab * math.tan(root_ab)))
        return [core, matching]

    xis = np.linspace(1.0, 30.0, 600)
    log_Ss = np.linspace(math.log(1e-6), math.log(0.5), 600)
    core = np.array([[system([x, s])[0] for s in log_Ss] for x in xis])
    match = np.array([[system([x, s])[1] for s in log_Ss] for x in xis])
    # cells where both residuals change sign
    both = ((np.sign(core[:-1, :-1]) != np.sign(core[1:, 1:])) | (np.sign(core[1:, :-1]) != np.sign(core[:-1, 1:]))) \
        & ((np.sign(match[:-1, :-1]) != np.sign(match[1:, 1:])) | (np.sign(match[1:, :-1]) != np.sign(match[:-1, 1:])))
    i, j = np.argwhere(both)[0]
    xi, log_S = fsolve(system, [xis[i], log_Ss[j]], xtol=1e-13)

    sol = subinner_asymptotics(epsilon, a, b, theta)
    assert sol.xi == pytest.approx(xi, rel=1e-4)
    assert sol.S == pytest.approx(math.exp(log_S), rel=1e-4)


EPSILON_LADDER = (2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3)


def test_subinner_amplitude_follows_log_scaling():
    theta = 0.5
    scaled = [subinner_asymptotics(eps, 1.0, 0.25, theta).S / (eps * abs(math.log(eps)) ** ((2.0 - theta) / (1.0 - theta)))
              for eps in EPSILON_LADDER]
    assert max(scaled) / min(scaled) < 3.0


def test_subinner_core_height_grows_as_epsilon_drops():
    xi = [subinner_asymptotics(eps, 1.0, 0.25, 0.5).xi for eps in EPSILON_LADDER]
    assert np.all(np.diff(xi) > 0.0)
