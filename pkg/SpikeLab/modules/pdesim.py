"""Method-of-lines simulation of the normalized spike system with no-flux boundaries.

The labor equation is written in conservation form,

    tau l_t = d/dx J + b l (a - l),   J = l_x - l k_x,

and discretized with cell-centred finite volumes; face fluxes vanish at x = +-1.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.signal import find_peaks
from scipy.sparse.linalg import splu
from scipy.special import exprel

from ..core.constants import (
    CSV_FLOAT_FORMAT,
    DEFAULT_CFL,
    DT_GROWTH_MAX,
    DT_SHRINK_MIN,
    DT_UNDERFLOW_FACTOR,
    MIN_EXTREMA,
    OSCILLATION_DEADBAND,
    ROS_ATOL,
    ROS_RTOL,
    SPIKE_DEGENERACY_RATIO,
)
from ..core.exceptions import InsufficientExtremaError, ParameterDomainError, PositivityError, StepFailure
from ..core.params import FieldPair, Grid, ModelParams

logger = logging.getLogger(__name__)

FLUX_SCHEMES = ("exponential", "upwind")
TIME_SCHEMES = ("rosenbrock", "imex")
INITIAL_TYPES = ("steady", "gaussian", "homogeneous", "from_file")
ROS_GAMMA = 1.0 + 1.0 / math.sqrt(2.0)


# --- CONFIGURATION ---
@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    grid: Grid
    t_end: float
    dt: float = 1e-3
    save_every: float | None = None
    track_every: float = 0.05
    initial: dict = field(default_factory=lambda: {"type": "homogeneous"})
    scheme: str = "rosenbrock"
    flux: str = "exponential"
    cfl: float = DEFAULT_CFL
    rtol: float = ROS_RTOL
    atol: float = ROS_ATOL

    def __post_init__(self):
        if self.params.tau <= 0.0:
            raise ParameterDomainError("Simulation needs tau > 0; tau = 0 is handled by the stability module only.")
        for name in ("dt", "t_end", "track_every", "cfl", "rtol", "atol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ParameterDomainError(f"{name} must be finite and positive, got {value}")
        if self.save_every is not None and not self.save_every > 0.0:
            raise ParameterDomainError(f"save_every must be positive, got {self.save_every}")
        if self.scheme not in TIME_SCHEMES:
            raise ParameterDomainError(f"Unknown time scheme '{self.scheme}'. Choose from {TIME_SCHEMES}.")
        if self.flux not in FLUX_SCHEMES:
            raise ParameterDomainError(f"Unknown flux scheme '{self.flux}'. Choose from {FLUX_SCHEMES}.")
        if self.initial.get("type") not in INITIAL_TYPES:
            raise ParameterDomainError(f"Unknown initial condition '{self.initial.get('type')}'. Choose from {INITIAL_TYPES}.")


# --- INITIAL DATA ---
def initial_fields(config: SimConfig) -> FieldPair:
    initial = config.initial
    params, grid = config.params, config.grid
    kind = initial["type"]
    if kind == "steady":
        from .steady import build_steady_state

        u = build_steady_state(params, grid, float(initial.get("x0", 0.0))).fields
    elif kind == "gaussian":
        x0 = float(initial.get("x0", 0.0))
        width = float(initial.get("width", 0.05))
        mass = float(initial.get("mass", 0.1))
        bump = mass / (width * math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * ((grid.x - x0) / width) ** 2)
        u = FieldPair(l=np.full(grid.n, params.a), k=params.a + bump)
    elif kind == "homogeneous":
        u = FieldPair.homogeneous(grid, float(initial.get("l0", params.a)), float(initial.get("k0", params.a)))
    else:
        data = np.loadtxt(initial["path"], delimiter=",", skiprows=1, ndmin=2)
        x_file, l_file, k_file = data[:, 0], data[:, 1], data[:, 2]
        u = FieldPair(l=np.interp(grid.x, x_file, l_file), k=np.interp(grid.x, x_file, k_file))

    noise = float(initial.get("noise", 0.0))
    if noise > 0.0:
        rng = np.random.default_rng(int(initial.get("seed", 0)))
        u = FieldPair(l=u.l * np.exp(noise * rng.standard_normal(grid.n)),
                      k=u.k * np.exp(noise * rng.standard_normal(grid.n)))
    return u.validate()


# --- SPATIAL DISCRETIZATION ---
def _bernoulli(z):
    return 1.0 / exprel(z)


def _bernoulli_prime(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    B = _bernoulli(safe)
    return np.where(small, -0.5 + z / 6.0 - z ** 3 / 180.0, B * (1.0 - safe - B) / safe)


def _face_terms(l: np.ndarray, k: np.ndarray, dx: float, flux: str):
    dk = np.diff(k)
    if flux == "exponential":
        B_plus, B_minus = _bernoulli(dk), _bernoulli(-dk)
        d_left = -B_minus / dx
        d_right = B_plus / dx
        J = d_right * l[1:] + d_left * l[:-1]
        d_jump = (_bernoulli_prime(dk) * l[1:] + _bernoulli_prime(-dk) * l[:-1]) / dx
    else:
        upwind_left = dk > 0.0
        l_up = np.where(upwind_left, l[:-1], l[1:])
        J = (l[1:] - l[:-1]) / dx - dk / dx * l_up
        d_left = -1.0 / dx - np.where(upwind_left, dk / dx, 0.0)
        d_right = 1.0 / dx - np.where(upwind_left, 0.0, dk / dx)
        d_jump = -l_up / dx
    return J, d_left, d_right, d_jump


def _divergence(J: np.ndarray, dx: float) -> np.ndarray:
    padded = np.concatenate([[0.0], J, [0.0]])
    return np.diff(padded) / dx


def _neumann_laplacian(v: np.ndarray, dx: float) -> np.ndarray:
    return _divergence(np.diff(v) / dx, dx)


def _production(l: np.ndarray, k: np.ndarray, theta: float) -> np.ndarray:
    return k * (l / k) ** (1.0 - theta)


def spatial_rhs(u: FieldPair, params: ModelParams, grid: Grid, flux: str = "exponential") -> FieldPair:
    u.validate()
    l, k = u.l, u.k
    J = _face_terms(l, k, grid.dx, flux)[0]
    l_rate = (_divergence(J, grid.dx) + params.b * l * (params.a - l)) / params.tau
    k_rate = params.epsilon ** 2 * _neumann_laplacian(k, grid.dx) - k + _production(l, k, params.theta)
    return FieldPair(l=l_rate, k=k_rate)


def _laplacian_matrix(n: int, dx: float) -> sparse.csc_matrix:
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sparse.diags([off, main, off], [-1, 0, 1], format="csc") / dx ** 2


def jacobian_blocks(u: FieldPair, params: ModelParams, grid: Grid, flux: str = "exponential"):
    l, k, dx, n = u.l, u.k, grid.dx, grid.n
    _, d_left, d_right, d_jump = _face_terms(l, k, dx, flux)
    zero = np.zeros(1)

    ll_main = (np.concatenate([d_left, zero]) - np.concatenate([zero, d_right])) / dx + params.b * (params.a - 2.0 * l)
    ll = sparse.diags([-d_left / dx, ll_main, d_right / dx], [-1, 0, 1], format="csc")
    lk_main = -(np.concatenate([d_jump, zero]) + np.concatenate([zero, d_jump])) / dx
    lk = sparse.diags([d_jump / dx, lk_main, d_jump / dx], [-1, 0, 1], format="csc")

    ratio = l / k
    kl = sparse.diags((1.0 - params.theta) * ratio ** (-params.theta), format="csc")
    kk = params.epsilon ** 2 * _laplacian_matrix(n, dx) + sparse.diags(
        -1.0 + params.theta * ratio ** (1.0 - params.theta), format="csc")
    return ll, lk, kl, kk


def rhs_jacobian(u: FieldPair, params: ModelParams, grid: Grid, flux: str = "exponential") -> sparse.csc_matrix:
    ll, lk, kl, kk = jacobian_blocks(u, params, grid, flux)
    return sparse.bmat([[ll / params.tau, lk / params.tau], [kl, kk]], format="csc")


# --- TIME STEPPING ---
@dataclass(frozen=True)
class SimState:
    t: float
    u: FieldPair
    dt: float
    rejected: int = 0


def _is_positive(v: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(v)) and np.all(v > 0.0))


def _rosenbrock_attempt(u: FieldPair, dt: float, config: SimConfig):
    params, grid = config.params, config.grid
    v = u.stack()
    F0 = spatial_rhs(u, params, grid, config.flux).stack()
    W = sparse.identity(v.size, format="csc") - ROS_GAMMA * dt * rhs_jacobian(u, params, grid, config.flux)
    lu = splu(W)
    k1 = lu.solve(F0)
    stage = v + dt * k1
    if not _is_positive(stage):
        return None, math.inf
    F1 = spatial_rhs(FieldPair.from_vector(stage), params, grid, config.flux).stack()
    k2 = lu.solve(F1 - 2.0 * k1)
    v_new = v + 1.5 * dt * k1 + 0.5 * dt * k2
    if not _is_positive(v_new):
        return None, math.inf
    scale = config.atol + config.rtol * np.maximum(np.abs(v), np.abs(v_new))
    error = float(np.sqrt(np.mean((0.5 * dt * (k1 + k2) / scale) ** 2)))
    return FieldPair.from_vector(v_new), error


def _banded(lower: np.ndarray, main: np.ndarray, upper: np.ndarray) -> np.ndarray:
    ab = np.zeros((3, main.size))
    ab[0, 1:] = upper
    ab[1] = main
    ab[2, :-1] = lower
    return ab


def _imex_attempt(u: FieldPair, dt: float, config: SimConfig):
    # diffusion and k decay implicit; upwind keeps advection explicit, exponential freezes k in the labor transport
    params, grid = config.params, config.grid
    l, k, dx = u.l, u.k, grid.dx
    J, d_left, d_right, _ = _face_terms(l, k, dx, config.flux)
    l_main = params.tau / dt + params.b * l
    if config.flux == "upwind":
        d_left = np.full(grid.n - 1, -1.0 / dx)
        d_right = np.full(grid.n - 1, 1.0 / dx)
        l_main = np.full(grid.n, params.tau / dt)
    zero = np.zeros(1)
    T_main = (np.concatenate([d_left, zero]) - np.concatenate([zero, d_right])) / dx
    l_matrix = _banded(d_left / dx, l_main - T_main, -d_right / dx)
    l_rhs = _divergence(J, dx) + params.b * l * (params.a - l)
    l_new = l + solve_banded((1, 1), l_matrix, l_rhs)
    if not _is_positive(l_new):
        return None, math.inf

    coef = params.epsilon ** 2 / dx ** 2
    k_main = np.full(grid.n, 2.0 * coef)
    k_main[0] = k_main[-1] = coef
    k_matrix = _banded(np.full(grid.n - 1, -coef), 1.0 / dt + 1.0 + k_main, np.full(grid.n - 1, -coef))
    k_rhs = params.epsilon ** 2 * _neumann_laplacian(k, dx) - k + _production(l_new, k, params.theta)
    k_new = k + solve_banded((1, 1), k_matrix, k_rhs)
    if not _is_positive(k_new):
        return None, math.inf
    return FieldPair(l=l_new, k=k_new), 0.0


def cfl_limit(u: FieldPair, config: SimConfig) -> float:
    speed = float(np.max(np.abs(np.diff(u.k)))) / config.grid.dx
    if speed == 0.0:
        return math.inf
    return config.cfl * config.params.tau * config.grid.dx / speed


def step(state: SimState, dt: float, config: SimConfig) -> SimState:
    """One accepted step starting from dt; halves dt on positivity loss or error-test failure."""
    dt_floor = config.dt * DT_UNDERFLOW_FACTOR
    if config.scheme == "imex":
        dt = min(dt, cfl_limit(state.u, config))
    rejected = 0
    while True:
        if dt < dt_floor:
            raise StepFailure(f"Time step underflow (dt={dt:.3e}) at t={state.t:.6g}.", t=state.t)
        if config.scheme == "rosenbrock":
            u_new, error = _rosenbrock_attempt(state.u, dt, config)
        else:
            u_new, error = _imex_attempt(state.u, dt, config)
        if u_new is not None and error <= 1.0:
            break
        rejected += 1
        if u_new is None:
            dt *= 0.5
        else:
            dt *= max(DT_SHRINK_MIN, 0.9 / math.sqrt(error))
    if config.scheme == "rosenbrock":
        factor = DT_GROWTH_MAX if error == 0.0 else min(DT_GROWTH_MAX, max(DT_SHRINK_MIN, 0.9 / math.sqrt(error)))
        dt_next = dt * factor
    else:
        dt_next = config.dt
    return SimState(t=state.t + dt, u=u_new, dt=dt_next, rejected=rejected)


# --- DIAGNOSTICS ---
@dataclass(frozen=True)
class SpikeObservation:
    t: float
    x0: float
    height_k: float
    height_l: float
    S_estimate: float
    S_outer: float = math.nan
    degenerate: bool = False


def detect_spike(u: FieldPair, grid: Grid, params: ModelParams | None = None, t: float = 0.0) -> SpikeObservation:
    k, x, dx = u.k, grid.x, grid.dx
    i = int(np.argmax(k))
    x0, height = float(x[i]), float(k[i])
    if 0 < i < grid.n - 1:
        curvature = k[i - 1] - 2.0 * k[i] + k[i + 1]
        if curvature < 0.0:
            offset = 0.5 * (k[i - 1] - k[i + 1]) / curvature
            x0 = float(x[i] + offset * dx)
            height = float(k[i] - 0.25 * (k[i - 1] - k[i + 1]) * offset)
    x0 = min(max(x0, -1.0), 1.0)
    degenerate = bool(k.max() / np.median(k) < SPIKE_DEGENERACY_RATIO)
    edge = -1.0 if x0 >= 0.0 else 1.0
    midpoint = 0.5 * (x0 + edge)
    S_estimate = float(np.interp(midpoint, x, k))
    S_outer = math.nan
    if params is not None and params.outer_valid and not degenerate:
        from .steady import far_field_amplitude

        S_outer = far_field_amplitude(u, grid, params, x0)
    return SpikeObservation(t=t, x0=x0, height_k=height, height_l=float(np.interp(x0, x, u.l)),
                            S_estimate=S_estimate, S_outer=S_outer, degenerate=degenerate)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    spike_track: list = field(default_factory=list)

    def track(self, name: str) -> np.ndarray:
        return np.array([getattr(obs, name) for obs in self.spike_track])


def _due(t: float, target: float) -> bool:
    return t >= target - 1e-12 * max(1.0, abs(target))


def run(config: SimConfig) -> Trajectory:
    grid, params = config.grid, config.params
    u = initial_fields(config)
    state = SimState(t=0.0, u=u, dt=config.dt)
    save_every = config.save_every or config.t_end
    trajectory = Trajectory(times=[0.0], snapshots=[u.copy()], spike_track=[detect_spike(u, grid, params, 0.0)])
    next_track, next_save = config.track_every, save_every
    steps = 0
    logger.info(f"Simulating {params.as_dict()} on n={grid.n} to t={config.t_end} ({config.scheme}/{config.flux})")

    while not _due(state.t, config.t_end):
        target = min(next_track, next_save, config.t_end)
        gap = target - state.t
        dt_try = min(state.dt, gap)
        new_state = step(state, dt_try, config)
        if dt_try == gap and new_state.rejected == 0:
            new_state = SimState(t=target, u=new_state.u, dt=max(new_state.dt, state.dt))
        state = new_state
        steps += 1
        if _due(state.t, next_track):
            trajectory.spike_track.append(detect_spike(state.u, grid, params, state.t))
            next_track += config.track_every
        if _due(state.t, next_save) or _due(state.t, config.t_end):
            trajectory.times.append(state.t)
            trajectory.snapshots.append(state.u.copy())
            next_save += save_every
            logger.debug(f"t={state.t:.4f}: {steps} steps, dt={state.dt:.3e}")
    logger.info(f"Simulation finished after {steps} steps.")
    return trajectory


@dataclass(frozen=True)
class OscillationReport:
    amplitude: float
    period: float
    slope: float
    classification: str
    extrema: int


def _refine_extremum(t: np.ndarray, h: np.ndarray, i: int) -> tuple[float, float]:
    if 0 < i < h.size - 1:
        denominator = h[i - 1] - 2.0 * h[i] + h[i + 1]
        if denominator != 0.0:
            offset = 0.5 * (h[i - 1] - h[i + 1]) / denominator
            if abs(offset) <= 1.0:
                dt = t[i + 1] - t[i] if offset > 0 else t[i] - t[i - 1]
                return t[i] + offset * dt, h[i] - 0.25 * (h[i - 1] - h[i + 1]) * offset
    return float(t[i]), float(h[i])


def measure_oscillation(traj: Trajectory, t_window: tuple[float, float] | None = None,
                        deadband: float = OSCILLATION_DEADBAND) -> OscillationReport:
    t = traj.track("t")
    h = traj.track("height_k")
    if t_window is not None:
        inside = (t >= t_window[0]) & (t <= t_window[1])
        t, h = t[inside], h[inside]
    maxima = find_peaks(h)[0]
    minima = find_peaks(-h)[0]
    order = np.sort(np.concatenate([maxima, minima]))
    if order.size < MIN_EXTREMA:
        raise InsufficientExtremaError(f"Found {order.size} extrema in the height track; need at least {MIN_EXTREMA}.")

    refined = np.array([_refine_extremum(t, h, int(i)) for i in order])
    times, values = refined[:, 0], refined[:, 1]
    swings = np.abs(np.diff(values))
    mid_times = 0.5 * (times[1:] + times[:-1])
    slope = float(np.polyfit(mid_times, np.log(swings), 1)[0]) if swings.size >= 2 else 0.0

    max_times = np.array([_refine_extremum(t, h, int(i))[0] for i in maxima])
    period = float(np.mean(np.diff(max_times))) if max_times.size >= 2 else float(2.0 * np.mean(np.diff(times)))

    if slope < -deadband:
        classification = "decaying"
    elif slope > deadband:
        classification = "growing"
    else:
        classification = "sustained"
    logger.debug(f"Oscillation: {order.size} extrema, period={period:.4g}, log-amplitude slope={slope:.3e} -> {classification}")
    return OscillationReport(amplitude=float(0.5 * swings[-1]), period=period, slope=slope,
                             classification=classification, extrema=int(order.size))


# --- OUTPUT ---
def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["t", "x0", "height_k", "height_l", "S_estimate", "S_outer"]
    table = np.column_stack([traj.track(name) for name in columns])
    np.savetxt(path, table, delimiter=",", header=",".join(columns), comments="", fmt=CSV_FLOAT_FORMAT)
    return path


def write_snapshot_csv(u: FieldPair, grid: Grid, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack([grid.x, u.l, u.k]), delimiter=",", header="x,l,k",
               comments="", fmt=CSV_FLOAT_FORMAT)
    return path
