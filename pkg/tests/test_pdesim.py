import math

import numpy as np
import pytest

from SpikeLab.core.exceptions import InsufficientExtremaError, ParameterDomainError
from SpikeLab.core.params import FieldPair, ModelParams, make_grid
from SpikeLab.modules.pdesim import (
    SimConfig,
    SimState,
    SpikeObservation,
    Trajectory,
    detect_spike,
    initial_fields,
    measure_oscillation,
    rhs_jacobian,
    run,
    spatial_rhs,
    step,
    write_snapshot_csv,
    write_trajectory_csv,
)
from SpikeLab.modules.steady import build_steady_state


def _fd_jacobian(u, params, grid, flux):
    v = u.stack()
    columns = []
    for j in range(v.size):
        h = 1e-7 * max(1.0, abs(v[j]))
        plus, minus = v.copy(), v.copy()
        plus[j] += h
        minus[j] -= h
        f_plus = spatial_rhs(FieldPair.from_vector(plus), params, grid, flux).stack()
        f_minus = spatial_rhs(FieldPair.from_vector(minus), params, grid, flux).stack()
        columns.append((f_plus - f_minus) / (2.0 * h))
    return np.column_stack(columns)


@pytest.mark.parametrize("flux", ["exponential", "upwind"])
def test_analytic_jacobian_matches_finite_differences(smooth_state, flux):
    params, grid, u = smooth_state
    analytic = rhs_jacobian(u, params, grid, flux).toarray()
    numeric = _fd_jacobian(u, params, grid, flux)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * np.abs(analytic).max())


@pytest.mark.parametrize("flux", ["exponential", "upwind"])
def test_transport_conserves_labor(smooth_state, flux):
    params, grid, u = smooth_state
    rate = spatial_rhs(u, params, grid, flux)
    transport = params.tau * rate.l - params.b * u.l * (params.a - u.l)
    assert abs(np.sum(transport) * grid.dx) < 1e-10


def _loop_rhs(u, params, grid, flux):
    l, k, dx, n = u.l, u.k, grid.dx, grid.n
    faces = [0.0]
    for i in range(n - 1):
        dk = k[i + 1] - k[i]
        if flux == "exponential":
            forward = dk / math.expm1(dk) if dk != 0.0 else 1.0
            backward = -dk / math.expm1(-dk) if dk != 0.0 else 1.0
            faces.append((forward * l[i + 1] - backward * l[i]) / dx)
        else:
            upwind = l[i] if dk > 0.0 else l[i + 1]
            faces.append((l[i + 1] - l[i]) / dx - dk / dx * upwind)
    faces.append(0.0)
    l_rate, k_rate = np.empty(n), np.empty(n)
    for i in range(n):
        logistic = params.b * l[i] * (params.a - l[i])
        l_rate[i] = ((faces[i + 1] - faces[i]) / dx + logistic) / params.tau
        left = k[i - 1] if i > 0 else k[i]
        right = k[i + 1] if i < n - 1 else k[i]
        diffusion = params.epsilon ** 2 * (left - 2.0 * k[i] + right) / dx ** 2
        k_rate[i] = diffusion - k[i] + k[i] ** params.theta * l[i] ** (1.0 - params.theta)
    return l_rate, k_rate


@pytest.mark.parametrize("flux", ["exponential", "upwind"])
def test_spatial_rhs_matches_cell_by_cell_evaluation(flux):
    params = ModelParams(a=1.0, b=0.25, theta=0.3, epsilon=0.08, tau=0.4)
    grid = make_grid(64)
    rng = np.random.default_rng(11)
    phases = rng.uniform(0.0, 2.0 * np.pi, 2)
    u = FieldPair(l=np.exp(0.4 * np.cos(np.pi * grid.x + phases[0])),
                  k=np.exp(0.8 * np.cos(2.0 * np.pi * grid.x + phases[1])))
    rate = spatial_rhs(u, params, grid, flux)
    l_rate, k_rate = _loop_rhs(u, params, grid, flux)
    np.testing.assert_allclose(rate.l, l_rate, rtol=1e-12, atol=1e-12 * np.abs(l_rate).max())
    np.testing.assert_allclose(rate.k, k_rate, rtol=1e-12, atol=1e-12 * np.abs(k_rate).max())


def test_constant_fields_only_react():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.05, tau=1.0)
    grid = make_grid(50)
    rate = spatial_rhs(FieldPair.homogeneous(grid, 1.0, 2.0), params, grid)
    assert np.max(np.abs(rate.l)) <= 1e-14
    np.testing.assert_allclose(rate.k, -2.0 + math.sqrt(2.0), rtol=1e-13)


def test_exponential_flux_is_second_order():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.1, tau=1.0)
    errors = []
    for n in (40, 80, 160):
        grid = make_grid(n)
        c, s = np.cos(np.pi * grid.x), np.sin(np.pi * grid.x)
        l, k = 1.0 + 0.3 * c, 1.0 + 0.5 * c
        l_x, l_xx = -0.3 * np.pi * s, -0.3 * np.pi ** 2 * c
        k_x, k_xx = -0.5 * np.pi * s, -0.5 * np.pi ** 2 * c
        exact = l_xx - l_x * k_x - l * k_xx + params.b * l * (params.a - l)
        rate = spatial_rhs(FieldPair(l=l, k=k), params, grid)
        errors.append(np.max(np.abs(rate.l - exact)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.7)


@pytest.mark.parametrize("scheme, flux", [("rosenbrock", "exponential"), ("imex", "exponential"), ("imex", "upwind")])
def test_homogeneous_state_is_a_fixed_point(scheme, flux):
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.05, tau=1.0)
    grid = make_grid(100)
    config = SimConfig(params=params, grid=grid, t_end=10.0, dt=1e-2, scheme=scheme, flux=flux)
    state = SimState(t=0.0, u=initial_fields(config), dt=1e-2)
    for _ in range(1000):
        state = step(state, 1e-2, config)
    assert state.t == pytest.approx(10.0)
    assert np.max(np.abs(state.u.l - 1.0)) <= 1e-13
    assert np.max(np.abs(state.u.k - 1.0)) <= 1e-13


@pytest.mark.parametrize("flux", ["exponential", "upwind"])
def test_imex_step_changes_labor_mass_only_through_the_logistic_term(smooth_state, flux):
    params, grid, u = smooth_state
    config = SimConfig(params=params, grid=grid, t_end=1.0, dt=1e-3, scheme="imex", flux=flux)
    new = step(SimState(t=0.0, u=u, dt=1e-3), 1e-3, config)
    dt = new.t
    implicit = params.tau / dt + (params.b * u.l if flux == "exponential" else 0.0)
    logistic = params.b * u.l * (params.a - u.l)
    assert np.sum(implicit * (new.u.l - u.l)) == pytest.approx(np.sum(logistic), rel=1e-9)


def test_upwind_imex_step_respects_the_advective_cfl_limit():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.05, tau=0.1)
    grid = make_grid(200)
    k = 1.0 + 4.0 * np.exp(-(grid.x / 0.05) ** 2)
    u = FieldPair(l=np.ones(grid.n), k=k)
    config = SimConfig(params=params, grid=grid, t_end=1.0, dt=1e-2, scheme="imex", flux="upwind")
    new = step(SimState(t=0.0, u=u, dt=1e-2), 1e-2, config)
    speed = np.max(np.abs(np.diff(k))) / grid.dx
    assert new.t <= config.cfl * params.tau * grid.dx / speed * (1.0 + 1e-12)
    assert np.all(new.u.l > 0.0)


def test_sim_config_validation():
    grid = make_grid(40)
    with pytest.raises(ParameterDomainError):
        SimConfig(params=ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.1), grid=grid, t_end=1.0)
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.1, tau=1.0)
    with pytest.raises(ParameterDomainError):
        SimConfig(params=params, grid=grid, t_end=1.0, scheme="euler")
    with pytest.raises(ParameterDomainError):
        SimConfig(params=params, grid=grid, t_end=1.0, flux="central")
    with pytest.raises(ParameterDomainError):
        SimConfig(params=params, grid=grid, t_end=-1.0)
    with pytest.raises(ParameterDomainError):
        SimConfig(params=params, grid=grid, t_end=1.0, initial={"type": "sawtooth"})


def test_gaussian_initial_data_and_seeded_noise():
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.05, tau=1.0)
    grid = make_grid(400)
    initial = {"type": "gaussian", "x0": 0.3, "width": 0.05, "mass": 0.1, "noise": 1e-3, "seed": 3}
    config = SimConfig(params=params, grid=grid, t_end=1.0, initial=initial)
    first, second = initial_fields(config), initial_fields(config)
    np.testing.assert_array_equal(first.k, second.k)
    assert np.sum(first.k - 1.0) * grid.dx == pytest.approx(0.1, rel=1e-2)


def test_detect_spike_locates_bump():
    grid = make_grid(400)
    k = 1.0 + 2.0 * np.exp(-((grid.x - 0.3) / 0.05) ** 2)
    obs = detect_spike(FieldPair(l=np.ones(grid.n), k=k), grid, t=2.0)
    assert obs.x0 == pytest.approx(0.3, abs=0.5 * grid.dx)
    assert obs.height_k == pytest.approx(3.0, rel=1e-3)
    assert obs.t == 2.0
    assert not obs.degenerate
    assert math.isnan(obs.S_outer)


def test_detect_spike_on_off_center_composite():
    params = ModelParams(a=1.0, b=0.25, theta=0.5, epsilon=1e-2)
    grid = make_grid(1600, params.epsilon)
    ss = build_steady_state(params, grid, 0.5)
    obs = detect_spike(ss.fields, grid, params)
    assert abs(obs.x0 - 0.5) <= grid.dx
    assert not obs.degenerate
    assert obs.S_outer == pytest.approx(ss.S, rel=0.05)


def test_detect_spike_centres_symmetric_profile():
    grid = make_grid(200)
    k = 1.0 + 2.0 * np.cos(0.5 * np.pi * grid.x) ** 8
    obs = detect_spike(FieldPair(l=np.ones(grid.n), k=k), grid)
    assert abs(obs.x0) <= 0.1 * grid.dx


def test_detect_spike_flags_flat_fields():
    grid = make_grid(50)
    assert detect_spike(FieldPair.homogeneous(grid, 1.0, 1.0), grid).degenerate


def _synthetic_track(rate):
    t = np.arange(0.0, 60.0, 0.01)
    h = 5.0 + 0.2 * np.exp(rate * t) * np.sin(2.0 * np.pi * t / 3.0)
    track = [SpikeObservation(t=ti, x0=0.0, height_k=hi, height_l=hi, S_estimate=0.1) for ti, hi in zip(t, h)]
    return Trajectory(times=[0.0], snapshots=[], spike_track=track)


def test_measure_oscillation_classifies_sustained_and_decaying():
    sustained = measure_oscillation(_synthetic_track(0.0))
    assert sustained.classification == "sustained"
    assert sustained.period == pytest.approx(3.0, rel=1e-3)
    assert sustained.amplitude == pytest.approx(0.2, rel=1e-3)

    decaying = measure_oscillation(_synthetic_track(-0.05))
    assert decaying.classification == "decaying"
    assert decaying.slope == pytest.approx(-0.05, rel=1e-2)

    growing = measure_oscillation(_synthetic_track(0.02), t_window=(30.0, 60.0))
    assert growing.classification == "growing"


def test_measure_oscillation_needs_extrema():
    t = np.linspace(0.0, 10.0, 200)
    track = [SpikeObservation(t=ti, x0=0.0, height_k=1.0 + ti, height_l=1.0, S_estimate=0.1) for ti in t]
    with pytest.raises(InsufficientExtremaError):
        measure_oscillation(Trajectory(spike_track=track))


@pytest.mark.parametrize("scheme, flux", [("rosenbrock", "exponential"), ("imex", "exponential"), ("imex", "upwind")])
def test_short_run_stays_positive_and_writes_output(tmp_path, scheme, flux):
    params = ModelParams(a=1.0, b=1.0, theta=0.5, epsilon=0.05, tau=1.0)
    grid = make_grid(320, params.epsilon)
    initial = {"type": "gaussian", "x0": 0.2, "width": 0.1, "mass": 0.05}
    config = SimConfig(params=params, grid=grid, t_end=0.2, dt=1e-3, save_every=0.1, track_every=0.05,
                       initial=initial, scheme=scheme, flux=flux)
    traj = run(config)
    assert traj.times[-1] == pytest.approx(0.2)
    assert len(traj.snapshots) == 3
    assert len(traj.spike_track) == 5
    for u in traj.snapshots:
        assert np.all(u.l > 0.0) and np.all(u.k > 0.0)

    track_path = write_trajectory_csv(traj, tmp_path / "track.csv")
    assert track_path.read_text().splitlines()[0] == "t,x0,height_k,height_l,S_estimate,S_outer"
    snap_path = write_snapshot_csv(traj.snapshots[-1], grid, tmp_path / "snap.csv")
    assert len(snap_path.read_text().splitlines()) == grid.n + 1
