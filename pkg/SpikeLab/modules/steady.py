"""Composite single-spike steady states and quasi-equilibria.

The outer solution on either side of a spike at x0 is the cosine branch

    l = k = S0 cos(sqrt(ab)(x -+ 1)) / cos(sqrt(ab)(x0 -+ 1)),

and the amplitude S0 is fixed by balancing the outer flux jump against the
core functional I(S):  S0 sqrt(ab) T(x0) / 2 = eps b I(S0), with
T(x0) = tan(sqrt(ab)(x0 + 1)) - tan(sqrt(ab)(x0 - 1)).
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..core.constants import CSV_FLOAT_FORMAT, MATCH_RTOL, MATCH_XTOL, S_MAX, S_MIN_OVER_EPSILON
from ..core.exceptions import BracketError, NoConvergenceError, ParameterDomainError
from ..core.params import FieldPair, Grid, ModelParams
from .innersolve import InnerProfile, compute_I, solve_inner

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchResult:
    S: float
    x0: float
    residual: float
    iterations: int
    inner: InnerProfile


@dataclass(frozen=True)
class SteadyState:
    params: ModelParams
    grid: Grid
    x0: float
    S: float
    inner: InnerProfile
    l_s: np.ndarray
    k_s: np.ndarray

    @property
    def fields(self) -> FieldPair:
        return FieldPair(l=self.l_s.copy(), k=self.k_s.copy())

    @property
    def xi(self) -> float:
        return self.inner.xi

    def far_field_gap(self) -> float:
        outside = np.abs(self.grid.x - self.x0) > self.params.epsilon * self.inner.Y
        if not np.any(outside):
            return 0.0
        return float(np.max(np.abs(self.l_s[outside] - self.k_s[outside])))

    def metadata(self) -> dict:
        return {**self.params.as_dict(), "x0": self.x0, "S": self.S, "xi": self.xi, "n": self.grid.n}


# --- MATCHING ---
def tangent_sum(x0: float, sqrt_ab: float) -> float:
    return math.tan(sqrt_ab * (x0 + 1.0)) - math.tan(sqrt_ab * (x0 - 1.0))


def check_center(x0: float, params: ModelParams) -> None:
    params.require_outer_valid()
    if not abs(x0) < 1.0 or params.sqrt_ab * (1.0 + abs(x0)) >= math.pi / 2.0:
        raise ParameterDomainError(
            f"Spike center x0={x0} leaves the region sqrt(ab)(1+|x0|) < pi/2 where both outer cosines are positive."
        )


def solve_matching(x0: float, epsilon: float, a: float, b: float, theta: float) -> MatchResult:
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    check_center(x0, params)
    flux = 0.5 * params.sqrt_ab * tangent_sum(x0, params.sqrt_ab)

    def residual(S):
        return epsilon * b * compute_I(solve_inner(S, theta), a) - S * flux

    lo, hi = S_MIN_OVER_EPSILON * epsilon, S_MAX
    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo * r_hi > 0.0:
        raise BracketError(
            f"Matching condition has no sign change on S in [{lo:.3g}, {hi}] "
            f"(residuals {r_lo:.3e}, {r_hi:.3e}) for eps={epsilon}, a={a}, b={b}, theta={theta}, x0={x0}."
        )
    S, info = brentq(residual, lo, hi, xtol=MATCH_XTOL, rtol=MATCH_RTOL, full_output=True, disp=False)
    if not info.converged:
        raise NoConvergenceError(f"Matching iteration stopped after {info.iterations} steps: {info.flag}")
    relative = abs(residual(S)) / (S * flux)
    logger.debug(f"Matched S={S:.10g} at x0={x0} after {info.iterations} iterations (relative residual {relative:.1e})")
    return MatchResult(S=S, x0=x0, residual=relative, iterations=info.iterations, inner=solve_inner(S, theta))


def match_amplitude(epsilon: float, a: float, b: float, theta: float) -> MatchResult:
    return solve_matching(0.0, epsilon, a, b, theta)


def offcenter_amplitude(x0: float, epsilon: float, a: float, b: float, theta: float) -> MatchResult:
    return solve_matching(float(x0), epsilon, a, b, theta)


# --- COMPOSITE PROFILE ---
def outer_branch(x, x0: float, S0: float, sqrt_ab: float):
    x = np.asarray(x, dtype=float)
    right = S0 * np.cos(sqrt_ab * (x - 1.0)) / math.cos(sqrt_ab * (x0 - 1.0))
    left = S0 * np.cos(sqrt_ab * (x + 1.0)) / math.cos(sqrt_ab * (x0 + 1.0))
    return np.where(x >= x0, right, left)


def composite_fields(x, x0: float, S0: float, inner: InnerProfile, epsilon: float, a: float, b: float):
    """Additive composite: inner core plus outer cosine minus their common value S0."""
    x = np.asarray(x, dtype=float)
    y = np.abs(x - x0) / epsilon
    inside = y <= inner.Y
    K_core = np.full_like(x, inner.S)
    L_core = np.full_like(x, inner.S)
    if np.any(inside):
        K_core[inside] = PchipInterpolator(inner.y, inner.K0)(y[inside])
        L_core[inside] = PchipInterpolator(inner.y, inner.L0)(y[inside])
    outer = outer_branch(x, x0, S0, math.sqrt(a * b))
    return L_core + outer - S0, K_core + outer - S0


def build_steady_state(params: ModelParams, grid: Grid, x0: float = 0.0) -> SteadyState:
    match = offcenter_amplitude(x0, params.epsilon, params.a, params.b, params.theta)
    l_s, k_s = composite_fields(grid.x, x0, match.S, match.inner, params.epsilon, params.a, params.b)
    FieldPair(l=l_s, k=k_s).validate()
    logger.info(f"Built steady state at x0={x0}: S={match.S:.6g}, xi={match.inner.xi:.6g} on n={grid.n}")
    return SteadyState(params=params, grid=grid, x0=float(x0), S=match.S, inner=match.inner, l_s=l_s, k_s=k_s)


# --- MEASURED AMPLITUDE ---
def far_field_amplitude(u: FieldPair, grid: Grid, params: ModelParams, x0: float) -> float:
    sqrt_ab = params.sqrt_ab
    if x0 <= 0.0:
        side = grid.x >= x0 + 0.5 * (1.0 - x0)
        shape = np.cos(sqrt_ab * (grid.x[side] - 1.0)) / math.cos(sqrt_ab * (x0 - 1.0))
    else:
        side = grid.x <= x0 - 0.5 * (1.0 + x0)
        shape = np.cos(sqrt_ab * (grid.x[side] + 1.0)) / math.cos(sqrt_ab * (x0 + 1.0))
    return float(np.dot(u.l[side], shape) / np.dot(shape, shape))


def polish_steady_state(ss: SteadyState, flux: str = "exponential", tol: float = 1e-8, max_iter: int = 40) -> SteadyState:
    from scipy.sparse.linalg import spsolve

    from .pdesim import rhs_jacobian, spatial_rhs

    params, grid = ss.params.with_(tau=ss.params.tau or 1.0), ss.grid
    u = ss.fields
    for iteration in range(1, max_iter + 1):
        F = spatial_rhs(u, params, grid, flux).stack()
        delta = spsolve(rhs_jacobian(u, params, grid, flux), -F)
        v = u.stack()
        damping = 1.0
        while np.any(v + damping * delta <= 0.0):
            damping *= 0.5
            if damping < 1e-6:
                raise NoConvergenceError(f"Newton polish lost positivity at iteration {iteration}.")
        u = FieldPair.from_vector(v + damping * delta)
        update = float(np.max(np.abs(delta))) / float(np.max(v))
        logger.debug(f"Newton polish iteration {iteration}: update={update:.3e}, damping={damping:g}")
        if damping == 1.0 and update <= tol:
            break
    else:
        raise NoConvergenceError(f"Newton polish did not converge to {tol:g} in {max_iter} iterations.")
    return SteadyState(params=ss.params, grid=grid, x0=ss.x0, S=far_field_amplitude(u, grid, params, ss.x0),
                       inner=ss.inner, l_s=u.l, k_s=u.k)


@dataclass(frozen=True)
class RelaxedState:
    S: float
    xi: float
    x0: float
    fields: FieldPair
    t_end: float


def relax_steady_state(params: ModelParams, grid: Grid, x0: float = 0.0, t_end: float = 50.0,
                       method: str = "newton", **sim_options) -> RelaxedState:
    from .pdesim import SimConfig, detect_spike, run

    if method == "newton":
        final = polish_steady_state(build_steady_state(params, grid, x0), **sim_options).fields
        t_end = math.inf
    else:
        config = SimConfig(params=params, grid=grid, t_end=t_end, initial={"type": "steady", "x0": x0}, **sim_options)
        final = run(config).snapshots[-1]
    spike = detect_spike(final, grid)
    S = far_field_amplitude(final, grid, params, spike.x0)
    logger.info(f"Relaxed steady state eps={params.epsilon:g}: S={S:.6g}, height={spike.height_k:.6g}")
    return RelaxedState(S=S, xi=spike.height_k, x0=spike.x0, fields=final, t_end=t_end)


def write_steady_state(ss: SteadyState, directory, prefix: str = "steady") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{prefix}.csv"
    np.savetxt(csv_path, np.column_stack([ss.grid.x, ss.l_s, ss.k_s]), delimiter=",",
               header="x,l_s,k_s", comments="", fmt=CSV_FLOAT_FORMAT)
    meta_path = directory / f"{prefix}.json"
    meta_path.write_text(json.dumps(ss.metadata(), indent=2, sort_keys=True))
    return [csv_path, meta_path]
