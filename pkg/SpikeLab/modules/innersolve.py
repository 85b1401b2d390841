"""Core (inner) problem of a single spike on the half line.

In the stretched variable y = (x - x0)/epsilon the capital core solves

    K'' = K - g(K),   g(K) = S^(1-theta) K^theta e^((1-theta)(K-S)),

with K'(0) = 0 and K -> S as y -> oo, and the labor core is slaved to it through
L = S e^(K-S). The first integral K'^2 = 2 W(K), W(K) = int_S^K (z - g(z)) dz,
fixes the core height xi as the nontrivial root of W.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.optimize import brentq
from scipy.special import gammaln

from ..core.constants import (
    CSV_FLOAT_FORMAT,
    FAR_FIELD_TOL,
    INNER_DY_LADDER,
    INNER_POINTS_PER_CORE,
    INNER_RESIDUAL_TOL,
    INNER_SOLVE_TOL,
    INNER_Y_MARGIN,
    INNER_Y_MAX,
    INNER_Y_MIN,
    QUAD_EPSREL,
    SUBINNER_MAX_EPSILON,
    SUBINNER_MIN_LOG_SEPARATION,
    SUBINNER_MIN_XI,
    TAIL_SWITCH,
)
from ..core.exceptions import DegenerateSolutionError, NoConvergenceError, ParameterDomainError
from ..core.params import ModelParams

logger = logging.getLogger(__name__)

SHOULDER_FRACTION = 0.1
Y_ROUNDING = 5.0


# --- FIRST INTEGRAL ---
class FirstIntegral:
    _NODES, _WEIGHTS = np.polynomial.legendre.leggauss(16)
    PANEL_RATIO = 1.25
    MAX_PANEL = 2.0

    def __init__(self, S: float, theta: float):
        self.S = S
        self.theta = theta
        self.kappa = math.sqrt((1.0 - theta) * (1.0 - S))
        self._edges = np.array([S])
        self._cumulative = np.array([0.0])

    def g(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(self.theta * np.log(z) + (1.0 - self.theta) * (math.log(self.S) + z - self.S))

    def h(self, z):
        return np.asarray(z, dtype=float) - self.g(z)

    def _panels(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        points = mid[:, None] + half[:, None] * self._NODES[None, :]
        return (self.h(points) @ self._WEIGHTS) * half

    def _ensure(self, k_max: float) -> None:
        if self._edges[-1] >= k_max:
            return
        new_edges = []
        edge = self._edges[-1]
        while edge < k_max:
            edge = min(edge * self.PANEL_RATIO, edge + self.MAX_PANEL)
            new_edges.append(edge)
        new_edges = np.array(new_edges)
        lows = np.concatenate([self._edges[-1:], new_edges[:-1]])
        increments = self._panels(lows, new_edges)
        self._edges = np.concatenate([self._edges, new_edges])
        self._cumulative = np.concatenate([self._cumulative, self._cumulative[-1] + np.cumsum(increments)])

    def potential(self, K):
        K_arr = np.atleast_1d(np.asarray(K, dtype=float))
        self._ensure(float(K_arr.max()))
        idx = np.clip(np.searchsorted(self._edges, K_arr, side="right") - 1, 0, self._edges.size - 1)
        values = self._cumulative[idx] + self._panels(self._edges[idx], K_arr)
        return values if np.ndim(K) else float(values[0])

    def turning_point(self) -> float:
        lo = self.S * (1.0 + 1e-6) + 1e-9
        hi = max(2.0, 2.0 * self.S)
        while self.h(hi) >= 0.0:
            hi *= 2.0
            if hi > 1e4:
                raise NoConvergenceError(f"No turning point of the core equation below 1e4 for S={self.S}.")
        return brentq(lambda z: float(self.h(z)), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def core_height(self) -> float:
        z_star = self.turning_point()
        if self.potential(z_star) <= 0.0:
            raise DegenerateSolutionError(f"Potential does not rise above S={self.S}; only constant solutions exist.")
        hi = 2.0 * z_star
        while self.potential(hi) >= 0.0:
            hi *= 2.0
            if hi > 1e4:
                raise NoConvergenceError(f"Core height not bracketed below 1e4 for S={self.S}.")
        return brentq(self.potential, z_star, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


# --- INNER PROFILE ---
@dataclass(frozen=True)
class InnerProfile:
    S: float
    theta: float
    y: np.ndarray
    K0: np.ndarray
    L0: np.ndarray
    K0y: np.ndarray
    xi: float
    Y: float
    kappa: float
    tail_start: float = 0.0

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    def evaluate(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        K = np.interp(y, self.y, self.K0)
        beyond = y > self.Y
        K = np.where(beyond, self.S + (self.K0[-1] - self.S) * np.exp(-self.kappa * (y - self.Y)), K)
        return K, self.S * np.exp(K - self.S)


def _pick_spacing(core_width: float) -> float:
    target = core_width / INNER_POINTS_PER_CORE
    for dy in INNER_DY_LADDER:
        if dy <= target:
            return dy
    logger.debug(f"Core width {core_width:.3e} asks for dy={target:.2e}; using the finest ladder step.")
    return INNER_DY_LADDER[-1]


def _check_amplitude(S: float, theta: float) -> None:
    if not (math.isfinite(S) and 0.0 < S < 1.0):
        raise ParameterDomainError(f"Far-field amplitude S must lie in (0, 1), got {S}")
    if not 0.0 <= theta < 1.0:
        raise ParameterDomainError(f"theta must lie in [0, 1), got {theta}")


@lru_cache(maxsize=512)
def _solve_inner_cached(S: float, theta: float, tol: float, Y: float | None) -> InnerProfile:
    fi = FirstIntegral(S, theta)
    xi = fi.core_height()
    if xi - S < 1e-8 * max(1.0, S):
        raise DegenerateSolutionError(f"Core height {xi} collapsed onto S={S}.")
    miss = abs(fi.potential(xi)) / xi ** 2
    if miss > tol:
        raise NoConvergenceError(f"Core height miss {miss:.2e} exceeds tolerance {tol:.1e} at S={S}.")

    # Phase 1: second-order core equation from the crest to the shoulder.
    shoulder = S + SHOULDER_FRACTION * (xi - S)

    def crest_rhs(_, u):
        return [u[1], float(fi.h(u[0]))]

    def reach_shoulder(_, u):
        return u[0] - shoulder

    reach_shoulder.terminal = True
    reach_shoulder.direction = -1
    crest = solve_ivp(crest_rhs, (0.0, INNER_Y_MAX), [xi, 0.0], method="DOP853",
                      rtol=1e-12, atol=1e-14, events=reach_shoulder, dense_output=True)
    if crest.status != 1:
        raise NoConvergenceError(f"Core orbit never reached the shoulder for S={S}: {crest.message}")
    y_shoulder = float(crest.t_events[0][0])

    # Phase 2: stable first-order descent d' = -sqrt(2 W(S + d)) for d = K - S.
    def descent_rhs(_, d):
        return [-math.sqrt(2.0 * max(fi.potential(S + d[0]), 0.0))]

    def reach_tail(_, d):
        return d[0] - TAIL_SWITCH

    reach_tail.terminal = True
    reach_tail.direction = -1
    descent = solve_ivp(descent_rhs, (y_shoulder, INNER_Y_MAX), [shoulder - S], method="DOP853",
                        rtol=1e-12, atol=1e-16, events=reach_tail, dense_output=True)
    if descent.status != 1:
        raise NoConvergenceError(f"Core descent did not reach the far field before y={INNER_Y_MAX} for S={S}.")
    y_tail = float(descent.t_events[0][0])
    eta = float(descent.y_events[0][0][0])

    kappa = fi.kappa
    Y_needed = y_tail + max(math.log(eta / FAR_FIELD_TOL), 0.0) / kappa
    Y_final = max(Y if Y is not None else max(INNER_Y_MIN, xi + INNER_Y_MARGIN), Y_needed)
    Y_final = Y_ROUNDING * math.ceil(Y_final / Y_ROUNDING)
    if Y_final > INNER_Y_MAX:
        raise NoConvergenceError(
            f"Far-field decay too slow at S={S} (kappa={kappa:.3e}); truncation would need Y={Y_final:.0f}."
        )

    dy = _pick_spacing(1.0 / math.sqrt(abs(float(fi.h(xi)))))
    n = int(round(Y_final / dy))
    y = dy * np.arange(n + 1)
    K = np.empty_like(y)
    Ky = np.empty_like(y)

    near = y <= y_shoulder
    K[near], Ky[near] = crest.sol(y[near])
    mid = (y > y_shoulder) & (y <= y_tail)
    K[mid] = S + descent.sol(y[mid])[0]
    Ky[mid] = -np.sqrt(2.0 * np.maximum(fi.potential(K[mid]), 0.0))
    far = y > y_tail
    K[far] = S + eta * np.exp(-kappa * (y[far] - y_tail))
    Ky[far] = -kappa * (K[far] - S)
    K[0], Ky[0] = xi, 0.0

    if np.any(np.diff(K) > 1e-12 * xi):
        raise NoConvergenceError(f"Core profile is not monotone for S={S}.")
    residual = float(np.max(np.abs(Ky ** 2 - 2.0 * fi.potential(K))))
    if residual > INNER_RESIDUAL_TOL:
        raise NoConvergenceError(f"First-integral residual {residual:.2e} exceeds {INNER_RESIDUAL_TOL:.0e} at S={S}.")

    L = S * np.exp(K - S)
    for arr in (y, K, L, Ky):
        arr.setflags(write=False)
    logger.debug(f"Inner core S={S:.6g}, theta={theta}: xi={xi:.10g}, Y={Y_final:g}, dy={dy:g}, residual={residual:.1e}")
    return InnerProfile(S=S, theta=theta, y=y, K0=K, L0=L, K0y=Ky, xi=xi, Y=Y_final, kappa=kappa, tail_start=y_tail)


def solve_inner(S: float, theta: float, tol: float = INNER_SOLVE_TOL, Y: float | None = None) -> InnerProfile:
    S, theta = float(S), float(theta)
    _check_amplitude(S, theta)
    return _solve_inner_cached(S, theta, float(tol), None if Y is None else float(Y))


# --- FUNCTIONALS ---
def first_integral_residual(p: InnerProfile) -> float:
    S, theta = p.S, p.theta
    weight = S ** (1.0 - theta)

    def g(z):
        return weight * z ** theta * math.exp((1.0 - theta) * (z - S))

    K = np.asarray(p.K0, dtype=float)
    G = np.empty_like(K)
    upper = S
    running = 0.0
    # Accumulate from the far field inward so every quad call spans a short interval.
    for i in range(K.size - 1, -1, -1):
        running += quad(g, upper, K[i], epsabs=0.0, epsrel=QUAD_EPSREL, limit=200)[0]
        upper = K[i]
        G[i] = running
    residual = np.abs(np.asarray(p.K0y) ** 2 - (K ** 2 - S ** 2) + 2.0 * G)
    return float(residual.max())


def compute_I(p: InnerProfile, a: float, b: float | None = None) -> float:
    # b only enters the matching condition
    excess = a * p.L0 - p.L0 ** 2 - (a * p.S - p.S ** 2)
    half_line = simpson(excess, x=p.y)
    tail = excess[-1] / p.kappa
    return float(-(half_line + tail))


def kinetic_integral(p: InnerProfile) -> float:
    half_line = simpson(p.K0y ** 2, x=p.y) + p.K0y[-1] ** 2 / (2.0 * p.kappa)
    return float(2.0 * half_line)


def sech_moment(p: float) -> float:
    if not (math.isfinite(p) and p > 0.0):
        raise ParameterDomainError(f"sech moment needs p > 0, got {p}")
    return math.exp(0.5 * math.log(math.pi) + gammaln(0.5 * p) - math.log(2.0) - gammaln(0.5 * (p + 1.0)))


def write_profile_csv(p: InnerProfile, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack([p.y, p.K0, p.L0]), delimiter=",", header="y,K0,L0",
               comments="", fmt=CSV_FLOAT_FORMAT)
    return path


# --- SUB-INNER LAYER ---
@dataclass(frozen=True)
class SubinnerSolution:
    xi: float
    S: float
    residual_core: float
    residual_matching: float
    xi_too_small: bool
    epsilon: float
    theta: float


def log_sech2(z):
    z = np.abs(np.asarray(z, dtype=float))
    return -2.0 * (z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0))


def sech_core_residual(z):
    """K00'' + 2 e^K00 for K00 = log sech^2, with K00'' = -2 sech^2 in closed form."""
    z = np.asarray(z, dtype=float)
    return -2.0 / np.cosh(z) ** 2 + 2.0 * np.exp(log_sech2(z))


def subinner_profile(xi: float, S: float, theta: float, y):
    z = 0.5 * (1.0 - theta) * xi * np.asarray(y, dtype=float)
    K = xi + log_sech2(z) / (1.0 - theta)
    L = S * math.exp(xi - S) * np.exp(log_sech2(z) / (1.0 - theta))
    return K, L


def _log_subinner_amplitude(xi: float, theta: float) -> float:
    return (math.log((1.0 - theta) / 2.0) + (2.0 - theta) * math.log(xi)) / (1.0 - theta) - xi


def subinner_amplitude(xi: float, theta: float) -> float:
    return math.exp(_log_subinner_amplitude(xi, theta))


def subinner_asymptotics(epsilon: float, a: float, b: float, theta: float) -> SubinnerSolution:
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    params.require_outer_valid()
    if epsilon > SUBINNER_MAX_EPSILON:
        logger.warning(f"epsilon={epsilon:g} is not small; the sub-inner reduction is unreliable.")
    if (1.0 - theta) * abs(math.log(epsilon)) < SUBINNER_MIN_LOG_SEPARATION:
        logger.warning(
            f"(1-theta)|ln eps| = {(1.0 - theta) * abs(math.log(epsilon)):.3g} is not large; "
            f"sub-inner asymptotics lose accuracy."
        )

    moment = sech_moment(4.0 / (1.0 - theta))
    outer = params.sqrt_ab * math.tan(params.sqrt_ab)
    log_prefactor = math.log(2.0 * epsilon * b * moment / (1.0 - theta))

    def log_balance(xi):
        log_S = _log_subinner_amplitude(xi, theta)
        return log_prefactor + log_S - 2.0 * math.exp(log_S) + 2.0 * xi - math.log(xi) - math.log(outer)

    lo, hi = 1e-2, 10.0
    while log_balance(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e3:
            raise NoConvergenceError(f"Sub-inner system not bracketed for epsilon={epsilon}, theta={theta}.")
    if log_balance(lo) >= 0.0:
        raise NoConvergenceError(f"Sub-inner system has no root above xi={lo} for epsilon={epsilon}.")
    xi = brentq(log_balance, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    S = subinner_amplitude(xi, theta)

    core_rhs = 2.0 / (1.0 - theta) * S ** (1.0 - theta) * xi ** theta * math.exp((1.0 - theta) * xi)
    residual_core = (xi ** 2 - core_rhs) / xi ** 2
    matching_rhs = epsilon * b * 2.0 * S ** 2 * math.exp(2.0 * xi - 2.0 * S) * moment / ((1.0 - theta) * xi)
    residual_matching = (matching_rhs - S * outer) / (S * outer)

    too_small = xi < SUBINNER_MIN_XI
    if too_small:
        logger.warning(f"Sub-inner core height xi={xi:.3g} is not large; the sech reduction is inconsistent.")
    logger.debug(f"Sub-inner eps={epsilon:g} theta={theta}: xi={xi:.8g}, S={S:.8g}")
    return SubinnerSolution(xi=xi, S=S, residual_core=residual_core, residual_matching=residual_matching,
                            xi_too_small=too_small, epsilon=epsilon, theta=theta)
