import math

import numpy as np
import pytest
from scipy import sparse

from SpikeLab.core.exceptions import ParameterDomainError
from SpikeLab.modules.pdesim import rhs_jacobian
from SpikeLab.modules.slowdyn import linear_growth_rate
from SpikeLab.modules.stability import (
    alpha_at,
    assemble_linearization,
    build_nlep_context,
    canonical_nlep_leading,
    check_far_field,
    compute_adjoint_P,
    dense_nlep_eigenvalue,
    discretized_steady_state,
    far_field_consistency,
    find_hopf_tau,
    leading_nlep_eigenvalue,
    mu_tan_mu,
    near_zero_eigenvalue,
    nlep_secular,
    rightmost_eigenvalues,
    scan_real_axis,
    small_eigenvalue,
    write_f_trace,
    write_hopf_table,
)
from SpikeLab.modules.steady import SteadyState


# --- NONLOCAL PROBLEM ---
def test_alpha_is_two_without_time_lag():
    assert alpha_at(0.0, 1.0, 1.0, 0.7 + 0.3j) == 2.0
    assert alpha_at(0.0, 0.5, 0.2, 1.3) == 2.0


def test_alpha_matches_direct_ratio():
    mu = math.sqrt(1.0 - 0.3)
    expected = 2.0 * math.tan(1.0) / (2.0 * math.tan(1.0) - mu * math.tan(mu))
    assert alpha_at(1.0, 1.0, 1.0, 0.3) == pytest.approx(expected, rel=1e-12)


def test_mu_tan_mu_is_branch_free():
    value = mu_tan_mu(-2.0 + 1.0j)
    mu = -np.sqrt(-2.0 + 1.0j)
    assert value == pytest.approx(complex(mu * np.tan(mu)), rel=1e-12)


def test_operator_rows_follow_three_point_stencil(nlep_ctx):
    L = nlep_ctx.operator_matrix().toarray()
    h2 = nlep_ctx.h ** 2
    i = nlep_ctx.size // 2
    assert L[i, i - 1] == pytest.approx(1.0 / h2)
    assert L[i, i + 1] == pytest.approx(1.0 / h2)
    assert L[i, i] == pytest.approx(-2.0 / h2 + nlep_ctx.potential[i])
    assert L[0, 1] == pytest.approx(2.0 / h2)
    assert L[-1, -2] == pytest.approx(2.0 / h2)


def test_secular_function_respects_conjugation(nlep_ctx):
    lam = 0.3 + 0.4j
    assert nlep_secular(lam.conjugate(), nlep_ctx, 0.5) == pytest.approx(nlep_secular(lam, nlep_ctx, 0.5).conjugate(),
                                                                         rel=1e-10)


@pytest.mark.parametrize("theta", [0.0, 0.5])
def test_no_positive_real_root_without_time_lag(theta):
    ctx = build_nlep_context(1e-2, 1.0, 1.0, theta)
    scan = scan_real_axis(ctx, 0.0, np.linspace(0.01, 2.0, 200))
    assert not [root for root in scan.roots if root > 0.0]


def test_write_f_trace(tmp_path, nlep_ctx):
    path = write_f_trace(nlep_ctx, 0.0, [0.1, 0.2 + 0.1j], tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "re_lambda,im_lambda,re_f,im_f"
    assert len(lines) == 3


@pytest.mark.slow
def test_centered_spike_is_stable_without_time_lag(nlep_ctx):
    assert leading_nlep_eigenvalue(nlep_ctx, 0.0).real < 0.0


@pytest.mark.slow
def test_eigenfunction_far_field_matches_outer_relation(nlep_ctx):
    lam = leading_nlep_eigenvalue(nlep_ctx, 2.7)
    assert far_field_consistency(lam, nlep_ctx, 2.7) < 1e-4
    assert check_far_field(0.5 + 0.5j, nlep_ctx, 1.0) < 1e-4


@pytest.mark.slow
def test_secular_root_agrees_with_dense_operator():
    ctx = build_nlep_context(1e-2, 1.0, 1.0, 0.5, n_points=1200)
    lam = leading_nlep_eigenvalue(ctx, 1.0)
    assert dense_nlep_eigenvalue(ctx, 1.0, lam) == pytest.approx(lam, abs=1e-6 * max(1.0, abs(lam)))


@pytest.mark.slow
def test_nlep_hopf_threshold_near_simulated_value():
    result = find_hopf_tau(2.5e-3, 1.0, 1.0, 0.5, method="nlep", tau_bracket=(0.5, 3.0))
    assert 1.22 < result.tau_h < 1.66
    assert result.upper - result.lower <= 1e-3
    assert result.frequency > 0.0


def test_find_hopf_tau_rejects_unknown_method():
    with pytest.raises(ParameterDomainError):
        find_hopf_tau(1e-2, 1.0, 1.0, 0.5, method="guess")


def test_write_hopf_table(tmp_path):
    rows = [{"epsilon": 1e-2, "theta": 0.5, "a": 1.0, "b": 1.0, "tau_h_nlep": 1.5, "tau_h_discretized": math.nan,
             "tau_h_pde": math.nan}]
    lines = write_hopf_table(rows, tmp_path / "hopf.csv").read_text().splitlines()
    assert lines[0] == "epsilon,theta,a,b,tau_h_nlep,tau_h_discretized,tau_h_pde"
    assert len(lines) == 2


# --- CANONICAL PROBLEM ---
def test_canonical_local_eigenvalue_is_one_quarter():
    assert canonical_nlep_leading(0.0, 1.0).real == pytest.approx(0.25, abs=1e-4)


def test_canonical_local_problem_ignores_r():
    assert canonical_nlep_leading(0.0, 2.0) == pytest.approx(canonical_nlep_leading(0.0, 1.0), abs=1e-12)


def test_canonical_instability_below_one_and_stability_at_two():
    assert canonical_nlep_leading(0.5, 1.0).real > 0.0
    assert canonical_nlep_leading(2.0, 1.0).real < 1e-6


def test_canonical_requires_r_at_least_one():
    with pytest.raises(ParameterDomainError):
        canonical_nlep_leading(1.0, 0.5)


# --- DISCRETIZED LINEARIZATION ---
def test_pencil_matches_simulator_jacobian(smooth_state):
    params, grid, u = smooth_state
    ss = SteadyState(params=params, grid=grid, x0=0.0, S=math.nan, inner=None, l_s=u.l, k_s=u.k)
    A, B = assemble_linearization(ss, params, grid)
    expected = (B @ rhs_jacobian(u, params, grid)).toarray()
    np.testing.assert_allclose(A.toarray(), expected, rtol=1e-12, atol=1e-12 * np.abs(expected).max())


def test_rightmost_eigenvalues_dense_and_shift_invert_agree():
    A = sparse.diags(-np.arange(1.0, 41.0), format="csc")
    B = sparse.identity(40, format="csc")
    dense = rightmost_eigenvalues(A, B, dense=True)
    shifted = rightmost_eigenvalues(A, B, shifts=[0.0], dense=False)
    assert dense.rightmost == pytest.approx(-1.0)
    assert shifted.rightmost == pytest.approx(-1.0, rel=1e-10)
    assert dense.method == "discretized_full"
    assert np.all(shifted.residuals < 1e-8)


def test_zero_time_lag_uses_reduced_problem():
    n = 20
    A = sparse.block_diag([-sparse.identity(n), sparse.diags(-np.arange(1.0, n + 1.0))], format="csc")
    B = sparse.diags(np.concatenate([np.zeros(n), np.ones(n)]), format="csc")
    spectrum = rightmost_eigenvalues(A, B, dense=True)
    assert spectrum.eigenvalues.size == n
    assert spectrum.rightmost == pytest.approx(-1.0)


@pytest.mark.slow
def test_reduced_pencil_is_the_small_time_lag_limit():
    ss = discretized_steady_state(2e-2, 1.0, 1.0, 0.5)
    reduced = rightmost_eigenvalues(*assemble_linearization(ss, ss.params.with_(tau=0.0), ss.grid), dense=True)
    lagged = rightmost_eigenvalues(*assemble_linearization(ss, ss.params.with_(tau=1e-6), ss.grid), dense=True)
    assert lagged.rightmost.real == pytest.approx(reduced.rightmost.real, abs=1e-3)
    assert abs(lagged.rightmost.imag) == pytest.approx(abs(reduced.rightmost.imag), abs=1e-3)


@pytest.mark.slow
def test_pencil_has_translational_eigenvalue_near_small_eigenvalue():
    epsilon, a, b, theta = 5e-3, 1.0, 0.25, 0.5
    ss = discretized_steady_state(epsilon, a, b, theta)
    A, B = assemble_linearization(ss, ss.params.with_(tau=0.1), ss.grid)
    translational = near_zero_eigenvalue(A, B, epsilon)
    expected = small_eigenvalue(epsilon, a, b, theta)
    assert abs(translational.imag) < 0.1 * abs(translational.real)
    assert translational.real == pytest.approx(expected, rel=0.3)


# --- SMALL EIGENVALUE ---
def test_adjoint_profile_properties(inner_profile):
    inner = inner_profile
    adjoint = compute_adjoint_P(inner)
    assert adjoint.P[0] == 0.0
    np.testing.assert_array_equal(adjoint.Q, inner.K0y)
    assert adjoint.P_inf < 0.0


def test_small_eigenvalue_is_negative_and_matches_drift_rate():
    value = small_eigenvalue(1e-2, 1.0, 1.0, 0.5)
    assert value < 0.0
    assert linear_growth_rate(1e-2, 1.0, 1.0, 0.5) == pytest.approx(value, rel=1e-12)
