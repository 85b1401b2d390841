"""Slow drift of a single spike center.

The center obeys

    dx0/dt = eps^2 S0 sqrt(ab) P_inf / int K0y^2 * (tan(sqrt(ab)(x0+1)) + tan(sqrt(ab)(x0-1))),

with S0 tied to x0 by the algebraic matching constraint of steady.solve_matching.
The pair is integrated as an ODE with the constraint re-solved at every evaluation.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import RK45
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ..core.constants import CSV_FLOAT_FORMAT, DRIFT_CONSTRAINT_TOL, DRIFT_RTOL, DRIFT_TABLE_NODES, NEWTON_MAX_ITER
from ..core.exceptions import NoConvergenceError, ParameterDomainError, SolverError
from ..core.params import ModelParams
from .innersolve import compute_I, kinetic_integral, solve_inner
from .stability import compute_adjoint_P, small_eigenvalue_from
from .steady import check_center, match_amplitude, offcenter_amplitude, tangent_sum

logger = logging.getLogger(__name__)

TIME_VARIABLES = ("fast", "slow")


def _prefactor(epsilon: float, time_variable: str) -> float:
    if time_variable not in TIME_VARIABLES:
        raise ParameterDomainError(f"time_variable must be one of {TIME_VARIABLES}, got '{time_variable}'")
    return epsilon ** 2 if time_variable == "fast" else epsilon ** 3


def drift_tangents(x0: float, sqrt_ab: float) -> float:
    return math.tan(sqrt_ab * (x0 + 1.0)) + math.tan(sqrt_ab * (x0 - 1.0))


def drift_velocity(x0: float, epsilon: float, a: float, b: float, theta: float, time_variable: str = "fast") -> float:
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    check_center(x0, params)
    match = offcenter_amplitude(x0, epsilon, a, b, theta)
    adjoint = compute_adjoint_P(match.inner)
    coefficient = match.S * params.sqrt_ab * adjoint.P_inf / kinetic_integral(match.inner)
    return _prefactor(epsilon, time_variable) * coefficient * drift_tangents(x0, params.sqrt_ab)


def linear_growth_rate(epsilon: float, a: float, b: float, theta: float) -> float:
    inner = match_amplitude(epsilon, a, b, theta).inner
    return small_eigenvalue_from(inner, epsilon, a, b)


# --- AMPLITUDE TABLE ---
@dataclass(frozen=True)
class AmplitudeTable:
    a: float
    theta: float
    log_S: np.ndarray
    core_integral: CubicSpline
    p_inf: CubicSpline
    kinetic: CubicSpline

    @property
    def bounds(self) -> tuple[float, float]:
        return float(math.exp(self.log_S[0])), float(math.exp(self.log_S[-1]))


def build_amplitude_table(S_lo: float, S_hi: float, a: float, theta: float,
                          nodes: int = DRIFT_TABLE_NODES, margin: float = 0.05) -> AmplitudeTable:
    lo, hi = math.log(S_lo) - margin, math.log(min(S_hi * math.exp(margin), 0.95))
    log_S = np.linspace(lo, hi, nodes)
    I_vals, P_vals, kin_vals = [], [], []
    for value in np.exp(log_S):
        inner = solve_inner(float(value), theta)
        I_vals.append(compute_I(inner, a))
        P_vals.append(compute_adjoint_P(inner).P_inf)
        kin_vals.append(kinetic_integral(inner))
    logger.info(f"Built amplitude table on S in [{math.exp(lo):.4g}, {math.exp(hi):.4g}] with {nodes} nodes")
    return AmplitudeTable(a=a, theta=theta, log_S=log_S, core_integral=CubicSpline(log_S, I_vals),
                          p_inf=CubicSpline(log_S, P_vals), kinetic=CubicSpline(log_S, kin_vals))


# --- DAE INTEGRATION ---
@dataclass(frozen=True)
class DriftState:
    x0: float
    S0: float
    t: float
    T: float
    residual: float


@dataclass
class DriftTrajectory:
    params: ModelParams
    time_variable: str
    states: list = field(default_factory=list)
    velocities: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.states])

    @property
    def times(self) -> np.ndarray:
        return self.column("t")


class _Constraint:
    """Warm-started Newton for eps b I(S) = S sqrt(ab) T(x0) / 2 on the table."""

    def __init__(self, table: AmplitudeTable, params: ModelParams, S_start: float):
        self.table = table
        self.params = params
        self.last_log_S = math.log(S_start)

    def residual(self, log_S: float, x0: float) -> float:
        flux = 0.5 * self.params.sqrt_ab * tangent_sum(x0, self.params.sqrt_ab)
        S = math.exp(log_S)
        return self.params.epsilon * self.params.b * float(self.table.core_integral(log_S)) - S * flux

    def relative_residual(self, log_S: float, x0: float) -> float:
        flux = 0.5 * self.params.sqrt_ab * tangent_sum(x0, self.params.sqrt_ab)
        return abs(self.residual(log_S, x0)) / (math.exp(log_S) * flux)

    def solve(self, x0: float) -> float:
        log_S = self.last_log_S
        flux = 0.5 * self.params.sqrt_ab * tangent_sum(x0, self.params.sqrt_ab)
        eb = self.params.epsilon * self.params.b
        for _ in range(NEWTON_MAX_ITER):
            value = self.residual(log_S, x0)
            slope = eb * float(self.table.core_integral(log_S, 1)) - math.exp(log_S) * flux
            step = value / slope
            log_S -= step
            if abs(step) < 1e-12:
                break
        else:
            raise NoConvergenceError(f"Drift constraint Newton stalled at x0={x0}")
        if not self.table.log_S[0] <= log_S <= self.table.log_S[-1]:
            raise SolverError(f"Drift constraint left the amplitude table at x0={x0}: S={math.exp(log_S):.4g}")
        self.last_log_S = log_S
        return log_S


def integrate_drift(x0_init: float, t_end: float, epsilon: float, a: float, b: float, theta: float,
                    n_out: int = 200, time_variable: str = "fast", table: AmplitudeTable | None = None) -> DriftTrajectory:
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    check_center(x0_init, params)
    prefactor = _prefactor(epsilon, time_variable)
    sqrt_ab = params.sqrt_ab

    if table is None:
        S_center = match_amplitude(epsilon, a, b, theta).S
        S_start = offcenter_amplitude(x0_init, epsilon, a, b, theta).S
        table = build_amplitude_table(min(S_center, S_start), max(S_center, S_start), a, theta)
    elif table.a != a or table.theta != theta:
        raise ParameterDomainError("Amplitude table was built for different (a, theta).")
    constraint = _Constraint(table, params, S_start=math.exp(0.5 * (table.log_S[0] + table.log_S[-1])))

    def velocity(x0: float, log_S: float) -> float:
        coefficient = math.exp(log_S) * sqrt_ab * float(table.p_inf(log_S)) / float(table.kinetic(log_S))
        return prefactor * coefficient * drift_tangents(x0, sqrt_ab)

    def rhs(_, y):
        return [velocity(y[0], constraint.solve(y[0]))]

    t_eval = np.linspace(0.0, t_end, n_out)
    logger.info(f"Integrating drift from x0={x0_init} to t={t_end:g} (eps={epsilon:g}, {time_variable} time)")
    traj = DriftTrajectory(params=params, time_variable=time_variable)

    def record(t: float, x0: float) -> None:
        log_S = constraint.solve(x0)
        residual = constraint.relative_residual(log_S, x0)
        if residual > DRIFT_CONSTRAINT_TOL:
            raise NoConvergenceError(f"Drift constraint residual {residual:.2e} at t={t:g} exceeds {DRIFT_CONSTRAINT_TOL}")
        traj.states.append(DriftState(x0=x0, S0=math.exp(log_S), t=t, T=epsilon ** 3 * t, residual=residual))
        traj.velocities.append(velocity(x0, log_S))

    try:
        record(0.0, float(x0_init))
        solver = RK45(rhs, 0.0, [float(x0_init)], t_end, rtol=DRIFT_RTOL, atol=1e-12)
        next_out = 1
        while next_out < n_out:
            message = solver.step()
            if solver.status == "failed":
                raise SolverError(f"Drift integration failed at t={solver.t:g}: {message}")
            dense = solver.dense_output()
            while next_out < n_out and t_eval[next_out] <= solver.t:
                record(float(t_eval[next_out]), float(dense(t_eval[next_out])[0]))
                next_out += 1
            if solver.status == "finished":
                break
    except SolverError as e:
        logger.error(f"Drift integration stopped after {len(traj.states)} of {n_out} outputs: {e}")
        e.partial = traj
        raise
    return traj


# --- EQUILIBRIA ---
@dataclass(frozen=True)
class DriftEquilibrium:
    x0: float
    roots: list
    sign_changes: int


def drift_equilibrium(a: float, b: float, samples: int = 2001) -> DriftEquilibrium:
    if not a * b < math.pi ** 2 / 4.0:
        raise ParameterDomainError(f"a*b = {a * b:.6g} must be below pi^2/4")
    sqrt_ab = math.sqrt(a * b)
    edge = min(1.0, math.pi / (2.0 * sqrt_ab) - 1.0) * (1.0 - 1e-9)
    xs = np.linspace(-edge, edge, samples)
    values = np.array([drift_tangents(x, sqrt_ab) for x in xs])
    roots = []
    for i in range(samples - 1):
        if values[i] == 0.0:
            roots.append(float(xs[i]))
        elif values[i] * values[i + 1] < 0.0:
            roots.append(brentq(drift_tangents, xs[i], xs[i + 1], args=(sqrt_ab,), xtol=1e-14))
    if not roots:
        logger.warning(f"No drift equilibrium found for a={a}, b={b}")
    x_bar = min(roots, key=abs) if roots else math.nan
    return DriftEquilibrium(x0=x_bar, roots=roots, sign_changes=len(roots))


# --- COMPARISON AND OUTPUT ---
def compare_with_track(drift: DriftTrajectory, track) -> list[dict]:
    times = drift.times
    rows = []
    for obs in track:
        i = int(np.argmin(np.abs(times - obs.t)))
        state = drift.states[i]
        rows.append({"t": obs.t, "x0_pde": obs.x0, "x0_dae": state.x0, "S_pde": obs.S_outer, "S_dae": state.S0,
                     "t_dae": state.t})
    return rows


def write_drift_csv(drift: DriftTrajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([drift.column("t"), drift.column("x0"), drift.column("S0"), np.array(drift.velocities),
                            drift.column("T")])
    np.savetxt(path, data, delimiter=",", header="t,x0,S0,velocity,T", comments="", fmt=CSV_FLOAT_FORMAT)
    return path


def write_comparison_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["t", "x0_pde", "x0_dae", "S_pde", "S_dae", "t_dae"]
    data = np.array([[row[c] for c in columns] for row in rows]).reshape(-1, len(columns))
    np.savetxt(path, data, delimiter=",", header=",".join(columns), comments="", fmt=CSV_FLOAT_FORMAT)
    return path
