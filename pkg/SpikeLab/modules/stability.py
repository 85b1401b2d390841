"""Linear stability of a single interior spike.

Large O(1) eigenvalues are governed by a nonlocal eigenvalue problem for even
core perturbations, reduced to the zeros of a scalar secular function f(lambda).
The O(eps^2) translational eigenvalue follows from the adjoint null vector of
the core. Both are cross-checked against the full discretized linearization.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgError, eig, eigvals, solve_banded
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, eigs, splu

from .. import config
from ..core.constants import (
    BRANCH_WARN,
    CANONICAL_CELLS,
    CANONICAL_HALF_WIDTH,
    CELLS_PER_EPSILON,
    CSV_FLOAT_FORMAT,
    EIG_RESIDUAL_TOL,
    HOPF_TAU_TOL,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    NLEP_FAR_FIELD_TOL,
    NLEP_IM_RANGE,
    NLEP_RE_RANGE,
    NLEP_SEED_GRID,
)
from ..core.exceptions import (
    NoConvergenceError,
    NoCrossingError,
    NoRootFoundError,
    ParameterDomainError,
    ResolventSingularError,
)
from ..core.params import Grid, ModelParams, make_grid
from .innersolve import InnerProfile, kinetic_integral
from .pdesim import jacobian_blocks
from .steady import SteadyState, build_steady_state, match_amplitude, polish_steady_state

logger = logging.getLogger(__name__)

HOPF_METHODS = ("nlep", "discretized", "pde_bisect")
NEWTON_SEEDS = 12


def mu_tan_mu(mu_sq: complex) -> complex:
    """mu tan(mu) for mu^2 = mu_sq; even in mu, so the branch of the root drops out."""
    mu = np.sqrt(complex(mu_sq))
    return complex(mu * np.tan(mu))


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    method: str
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rightmost(self) -> complex:
        return complex(self.eigenvalues[0])

    def rightmost_oscillatory(self, min_imag: float = 1e-6) -> complex | None:
        for lam in self.eigenvalues:
            if abs(lam.imag) > min_imag:
                return complex(lam)
        return None


def _sorted_spectrum(values, method: str, residuals=None) -> SpectrumResult:
    values = np.asarray(values, dtype=complex)
    order = np.argsort(-values.real, kind="stable")
    res = np.zeros(values.size) if residuals is None else np.asarray(residuals)[order]
    return SpectrumResult(eigenvalues=values[order], method=method, residuals=res)


# --- NONLOCAL EIGENVALUE PROBLEM ---
@dataclass(frozen=True)
class NLEPContext:
    inner: InnerProfile
    a: float
    b: float
    theta: float
    epsilon: float
    y: np.ndarray
    h: float
    K: np.ndarray
    L: np.ndarray
    source: np.ndarray
    potential: np.ndarray
    weights: np.ndarray
    include_higher_order: bool = False

    @property
    def S(self) -> float:
        return self.inner.S

    @property
    def size(self) -> int:
        return self.y.size

    @property
    def outer_coupling(self) -> float:
        sqrt_ab = math.sqrt(self.a * self.b)
        return sqrt_ab * math.tan(sqrt_ab)

    def operator_matrix(self) -> sparse.csr_matrix:
        n, h2 = self.size, self.h ** 2
        upper = np.full(n - 1, 1.0 / h2)
        lower = np.full(n - 1, 1.0 / h2)
        upper[0] = 2.0 / h2
        lower[-1] = 2.0 / h2
        return sparse.diags([lower, -2.0 / h2 + self.potential, upper], [-1, 0, 1], format="csr")

    def resolve(self, lam: complex) -> np.ndarray:
        n, h2 = self.size, self.h ** 2
        bands = np.zeros((3, n), dtype=complex)
        bands[0, 1:] = 1.0 / h2
        bands[0, 1] = 2.0 / h2
        bands[1] = -2.0 / h2 + self.potential - lam
        bands[2, :-1] = 1.0 / h2
        bands[2, -2] = 2.0 / h2
        try:
            u = solve_banded((1, 1), bands, self.source.astype(complex))
        except (LinAlgError, ValueError) as e:
            raise ResolventSingularError(f"L_N - lambda is singular at lambda={lam}: {e}") from e
        if not np.all(np.isfinite(u)):
            raise ResolventSingularError(f"Resolvent blew up at lambda={lam}.")
        return u

    def functional_row(self) -> np.ndarray:
        wL = self.weights * (self.a - 2.0 * self.L)
        row = -self.epsilon * self.b * wL * self.L
        row[-1] += self.epsilon * self.b * self.S * wL.sum()
        if self.include_higher_order:
            row[-1] += 2.0 * self.S ** 2 * self.outer_coupling
        return row

    def denominator(self, lam: complex, tau: float) -> complex:
        mu_sq = self.a * self.b - tau * lam
        if abs(np.cos(np.sqrt(complex(mu_sq)))) < BRANCH_WARN:
            logger.warning(f"cos(mu) is nearly zero at lambda={lam}, tau={tau}; f(lambda) is near a pole.")
        wL = self.weights * (self.a - 2.0 * self.L)
        value = 2.0 * self.S * mu_tan_mu(mu_sq) + self.epsilon * self.b * np.dot(wL, self.L - self.S)
        if self.include_higher_order:
            value -= 2.0 * self.S ** 2 * self.outer_coupling
        return complex(value)


def build_nlep_context(epsilon: float, a: float, b: float, theta: float, n_points: int | None = None,
                       include_higher_order: bool = False, inner: InnerProfile | None = None) -> NLEPContext:
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    params.require_outer_valid()
    if inner is None:
        inner = match_amplitude(epsilon, a, b, theta).inner
    if n_points is None:
        y, K = np.asarray(inner.y), np.asarray(inner.K0)
    else:
        y = np.linspace(0.0, inner.Y, int(n_points))
        K = PchipInterpolator(inner.y, inner.K0)(y)
    S = inner.S
    L = S * np.exp(K - S)
    source = K ** theta * L ** (1.0 - theta)
    potential = -1.0 + theta * K ** (theta - 1.0) * L ** (1.0 - theta) + (1.0 - theta) * source
    h = float(y[1] - y[0])
    weights = np.full(y.size, 2.0 * h)
    weights[0] = weights[-1] = h
    logger.debug(f"NLEP context eps={epsilon:g}, theta={theta}: S={S:.6g}, {y.size} points, h={h:.3e}")
    return NLEPContext(inner=inner, a=a, b=b, theta=theta, epsilon=epsilon, y=y, h=h, K=K, L=L, source=source,
                       potential=potential, weights=weights, include_higher_order=include_higher_order)


def nlep_secular(lam: complex, ctx: NLEPContext, tau: float) -> complex:
    u = ctx.resolve(complex(lam))
    g_numerator = np.dot(ctx.functional_row(), u)
    return complex(-(1.0 - ctx.theta) * g_numerator - ctx.denominator(complex(lam), tau))


def far_field_consistency(lam: complex, ctx: NLEPContext, tau: float) -> float:
    u = ctx.resolve(complex(lam))
    g0 = np.dot(ctx.functional_row(), u) / ctx.denominator(complex(lam), tau)
    psi_far = -(1.0 - ctx.theta) * g0 * u[-1]
    phi_far = ctx.S * (psi_far + g0)
    predicted = (1.0 - ctx.theta) / (1.0 - ctx.theta + lam) * phi_far
    return float(abs(psi_far - predicted) / max(abs(psi_far), 1e-300))


def _newton_root(ctx: NLEPContext, tau: float, seed: complex):
    lam = complex(seed)
    for _ in range(NEWTON_MAX_ITER):
        step = 1e-7 * (1.0 + abs(lam))
        value = nlep_secular(lam, ctx, tau)
        slope = (nlep_secular(lam + step, ctx, tau) - nlep_secular(lam - step, ctx, tau)) / (2.0 * step)
        if slope == 0.0:
            return None
        delta = value / slope
        lam -= delta
        if abs(lam) > 1e3:
            return None
        if abs(delta) <= NEWTON_TOL * (1.0 + abs(lam)):
            return complex(lam.real, abs(lam.imag))
    return None


def nlep_roots(ctx: NLEPContext, tau: float, extra_seeds=()) -> np.ndarray:
    re = np.linspace(*NLEP_RE_RANGE, NLEP_SEED_GRID[0])
    im = np.linspace(*NLEP_IM_RANGE, NLEP_SEED_GRID[1])
    seeds, magnitudes = [], []
    for x in re:
        for y in im:
            try:
                magnitudes.append(abs(nlep_secular(complex(x, y), ctx, tau)))
                seeds.append(complex(x, y))
            except ResolventSingularError:
                continue
    order = np.argsort(magnitudes)
    chosen = [seeds[i] for i in order[:NEWTON_SEEDS]] + [complex(s) for s in extra_seeds]

    roots: list[complex] = []
    for seed in chosen:
        try:
            root = _newton_root(ctx, tau, seed)
        except ResolventSingularError:
            continue
        if root is None:
            continue
        if all(abs(root - r) > 1e-7 * (1.0 + abs(r)) for r in roots):
            roots.append(root)
    if not roots:
        best = int(order[0])
        raise NoRootFoundError(f"No zero of f(lambda) found at tau={tau}; grid minimum |f|={magnitudes[best]:.3e} "
                               f"at lambda={seeds[best]}.", best_lambda=seeds[best], best_abs_f=magnitudes[best])
    return _sorted_spectrum(roots, "nlep_secular").eigenvalues


def check_far_field(lam: complex, ctx: NLEPContext, tau: float) -> float:
    mismatch = far_field_consistency(lam, ctx, tau)
    if mismatch > NLEP_FAR_FIELD_TOL:
        logger.warning(f"Far field of the eigenfunction at lambda={lam} misses its outer value by {mismatch:.2e}.")
    return mismatch


def leading_nlep_eigenvalue(ctx: NLEPContext, tau: float, cross_check: bool = False, extra_seeds=()) -> complex:
    lam = complex(nlep_roots(ctx, tau, extra_seeds)[0])
    if cross_check:
        check_far_field(lam, ctx, tau)
        dense = dense_nlep_eigenvalue(ctx, tau, lam)
        gap = abs(dense - lam) / max(1.0, abs(lam))
        if gap > 1e-6:
            logger.warning(f"Secular root {lam} and dense eigenvalue {dense} differ by {gap:.2e}.")
    logger.debug(f"Leading NLEP eigenvalue at tau={tau}: {lam}")
    return lam


def nonlocal_operator(ctx: NLEPContext, lam: complex, tau: float) -> np.ndarray:
    dense = ctx.operator_matrix().toarray().astype(complex)
    row = ctx.functional_row()
    return dense + np.outer((1.0 - ctx.theta) * ctx.source, row) / ctx.denominator(lam, tau)


def dense_nlep_eigenvalue(ctx: NLEPContext, tau: float, seed: complex, tol: float = 1e-12, max_iter: int = 40) -> complex:
    if ctx.size > config.DENSE_LIMIT:
        raise ParameterDomainError(f"Dense NLEP solve needs at most {config.DENSE_LIMIT} points, context has {ctx.size}.")

    def nearest(lam):
        values, vectors = eig(nonlocal_operator(ctx, lam, tau))
        i = int(np.argmin(np.abs(values - lam)))
        return complex(values[i]), vectors[:, i]

    def gap(lam):
        return nearest(lam)[0] - lam

    x0 = complex(seed)
    x1 = nearest(x0)[0]
    g0, g1 = gap(x0), gap(x1)
    for _ in range(max_iter):
        if abs(x1 - x0) <= tol * (1.0 + abs(x1)) or g1 == g0:
            break
        x0, x1 = x1, x1 - g1 * (x1 - x0) / (g1 - g0)
        g0, g1 = g1, gap(x1)
    else:
        raise NoConvergenceError(f"Dense NLEP iteration did not settle from seed {seed}.")
    value, vector = nearest(x1)
    M = nonlocal_operator(ctx, value, tau)
    residual = np.linalg.norm(M @ vector - value * vector) / (np.linalg.norm(M, 1) * np.linalg.norm(vector))
    if residual > EIG_RESIDUAL_TOL:
        logger.warning(f"Dense NLEP eigenpair residual {residual:.2e} exceeds {EIG_RESIDUAL_TOL:.0e}.")
    return value


@dataclass(frozen=True)
class RealScan:
    lambdas: np.ndarray
    values: np.ndarray
    roots: list


def scan_real_axis(ctx: NLEPContext, tau: float, lambdas) -> RealScan:
    lambdas = np.asarray(lambdas, dtype=float)
    values = np.full(lambdas.size, np.nan)
    for i, lam in enumerate(lambdas):
        try:
            values[i] = nlep_secular(lam, ctx, tau).real
        except ResolventSingularError:
            continue

    def real_f(lam):
        return nlep_secular(lam, ctx, tau).real

    roots = []
    for i in range(lambdas.size - 1):
        f0, f1 = values[i], values[i + 1]
        if not (np.isfinite(f0) and np.isfinite(f1)) or f0 * f1 > 0.0:
            continue
        if f0 == 0.0:
            roots.append(float(lambdas[i]))
            continue
        try:
            candidate = brentq(real_f, lambdas[i], lambdas[i + 1], xtol=1e-13)
            if abs(real_f(candidate)) < min(abs(f0), abs(f1)):
                roots.append(float(candidate))
            else:
                logger.debug(f"Discarded pole of f near lambda={candidate:.6g}")
        except ResolventSingularError:
            logger.debug(f"Discarded pole of f in [{lambdas[i]:.4g}, {lambdas[i + 1]:.4g}]")
    return RealScan(lambdas=lambdas, values=values, roots=roots)


def write_f_trace(ctx: NLEPContext, tau: float, lambdas, path) -> Path:
    rows = []
    for lam in np.asarray(lambdas, dtype=complex):
        try:
            value = nlep_secular(lam, ctx, tau)
        except ResolventSingularError:
            value = complex(np.nan, np.nan)
        rows.append([lam.real, lam.imag, value.real, value.imag])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.array(rows), delimiter=",", header="re_lambda,im_lambda,re_f,im_f", comments="",
               fmt=CSV_FLOAT_FORMAT)
    return path


# --- CANONICAL PROBLEM ---
def _canonical_leading(alpha: float, r: float, half_width: float, cells: int) -> complex:
    h = half_width / cells
    z = (np.arange(cells) + 0.5) * h
    rho = 1.5 / np.cosh(0.5 * z) ** 2
    main = np.full(cells, -2.0 / h ** 2)
    main[0] = -1.0 / h ** 2
    main[-1] = -3.0 / h ** 2
    off = np.full(cells - 1, 1.0 / h ** 2)
    operator = np.diag(main) + np.diag(off, 1) + np.diag(off, -1) + np.diag(rho / 3.0)
    weight = rho ** (2.0 * r)
    operator -= (alpha / 3.0) * np.outer(rho, weight) / weight.sum()
    values = eigvals(operator)
    return complex(values[np.argmax(values.real)])


def canonical_nlep_leading(alpha: float, r: float = 1.0, half_width: float = CANONICAL_HALF_WIDTH,
                           cells: int = CANONICAL_CELLS) -> complex:
    if r < 1.0:
        raise ParameterDomainError(f"Canonical problem needs r >= 1, got {r}")
    fine = _canonical_leading(alpha, r, half_width, cells)
    coarse = _canonical_leading(alpha, r, half_width, cells // 2)
    return (4.0 * fine - coarse) / 3.0


def alpha_at(tau: float, a: float, b: float, lam: complex = 0.0):
    base = mu_tan_mu(a * b)
    shifted = mu_tan_mu(a * b - tau * lam)
    denominator = 2.0 * base - shifted
    if abs(denominator) < 1e-8 * max(abs(base), 1e-300):
        logger.warning(f"alpha has a pole near tau={tau}, lambda={lam}.")
    value = 2.0 * base / denominator
    return value.real if value.imag == 0.0 else value


# --- DISCRETIZED LINEARIZATION ---
def assemble_linearization(ss: SteadyState, params: ModelParams, grid: Grid, flux: str = "exponential"):
    ll, lk, kl, kk = jacobian_blocks(ss.fields, params, grid, flux)
    A = sparse.bmat([[ll, lk], [kl, kk]], format="csc")
    B = sparse.diags(np.concatenate([np.full(grid.n, params.tau), np.ones(grid.n)]), format="csc")
    return A, B


def _pair_residuals(A, B, values, vectors) -> np.ndarray:
    scale_A = sparse.linalg.norm(A, 1) if sparse.issparse(A) else np.linalg.norm(A, 1)
    scale_B = sparse.linalg.norm(B, 1) if sparse.issparse(B) else np.linalg.norm(B, 1)
    residuals = []
    for lam, v in zip(values, vectors.T):
        r = A @ v - lam * (B @ v)
        residuals.append(np.linalg.norm(r) / ((scale_A + abs(lam) * scale_B) * np.linalg.norm(v)))
    return np.array(residuals)


def _dense_spectrum(A, B, n_half: int) -> SpectrumResult:
    A_dense, B_dense = A.toarray(), B.toarray()
    tau = B_dense[0, 0]
    if tau == 0.0:
        A_ll, A_lk = A_dense[:n_half, :n_half], A_dense[:n_half, n_half:]
        A_kl, A_kk = A_dense[n_half:, :n_half], A_dense[n_half:, n_half:]
        reduced = A_kk - A_kl @ np.linalg.solve(A_ll, A_lk)
        values, vectors = eig(reduced)
        residuals = _pair_residuals(reduced, np.eye(n_half), values, vectors)
        return _sorted_spectrum(values, "discretized_full", residuals)
    values, vectors = eig(A_dense, B_dense)
    finite = np.isfinite(values)
    residuals = _pair_residuals(A_dense, B_dense, values[finite], vectors[:, finite])
    return _sorted_spectrum(values[finite], "discretized_full", residuals)


def _shift_invert(A, B, sigma: complex, k: int):
    lu = splu((A - sigma * B).astype(complex).tocsc())
    op = LinearOperator(A.shape, matvec=lambda x: lu.solve(B @ x), dtype=complex)
    nu, vectors = eigs(op, k=k, which="LM")
    keep = np.abs(nu) > 0.0
    return sigma + 1.0 / nu[keep], vectors[:, keep]


def rightmost_eigenvalues(A, B, shifts=None, k: int = 6, dense: bool | None = None) -> SpectrumResult:
    """Rightmost finite eigenvalues of A v = lambda B v (B may be singular)."""
    n_half = A.shape[0] // 2
    if dense is None:
        dense = A.shape[0] <= config.DENSE_LIMIT
    if dense:
        return _dense_spectrum(A, B, n_half)
    if shifts is None:
        shifts = [1j * w for w in np.linspace(*NLEP_IM_RANGE, 6)]
    values, vectors = [], []
    for sigma in shifts:
        found, vecs = _shift_invert(A, B, complex(sigma), k)
        for lam, v in zip(found, vecs.T):
            if all(abs(lam - other) > 1e-8 * (1.0 + abs(lam)) for other in values):
                values.append(lam)
                vectors.append(v)
    residuals = _pair_residuals(A, B, np.array(values), np.array(vectors).T)
    bad = residuals > EIG_RESIDUAL_TOL
    if np.any(bad):
        logger.warning(f"{int(bad.sum())} shift-invert eigenpairs exceed residual {EIG_RESIDUAL_TOL:.0e}.")
    return _sorted_spectrum(values, "discretized_full", residuals)


def near_zero_eigenvalue(A, B, epsilon: float) -> complex:
    values, _ = _shift_invert(A, B, complex(-epsilon ** 2), 1)
    return complex(values[0])


def linearization_grid(epsilon: float) -> Grid:
    n = int(math.ceil(CELLS_PER_EPSILON / epsilon))
    return make_grid(n + n % 2, epsilon)


def discretized_steady_state(epsilon: float, a: float, b: float, theta: float, grid: Grid | None = None,
                             flux: str = "exponential") -> SteadyState:
    grid = grid or linearization_grid(epsilon)
    params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon)
    return polish_steady_state(build_steady_state(params, grid, 0.0), flux=flux)


# --- SMALL EIGENVALUE ---
@dataclass(frozen=True)
class AdjointProfile:
    y: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    P_inf: float


def compute_adjoint_P(inner: InnerProfile) -> AdjointProfile:
    K, L, Ky, S = inner.K0, inner.L0, inner.K0y, inner.S
    integrand = (Ky ** 2 - (K ** 2 - S ** 2)) / L
    P = 0.5 * (1.0 - inner.theta) * cumulative_trapezoid(integrand, x=inner.y, initial=0.0)
    P_inf = float(P[-1] + 0.5 * (1.0 - inner.theta) * integrand[-1] / inner.kappa)
    return AdjointProfile(y=inner.y, P=P, Q=np.array(Ky), P_inf=P_inf)


def small_eigenvalue_from(inner: InnerProfile, epsilon: float, a: float, b: float) -> float:
    adjoint = compute_adjoint_P(inner)
    sqrt_ab = math.sqrt(a * b)
    return epsilon ** 2 * 2.0 * inner.S * a * b * adjoint.P_inf / (kinetic_integral(inner) * math.cos(sqrt_ab) ** 2)


def small_eigenvalue(epsilon: float, a: float, b: float, theta: float) -> float:
    inner = match_amplitude(epsilon, a, b, theta).inner
    value = small_eigenvalue_from(inner, epsilon, a, b)
    logger.debug(f"Small eigenvalue eps={epsilon:g}, theta={theta}: {value:.6e}")
    return value


# --- HOPF THRESHOLD ---
@dataclass(frozen=True)
class HopfResult:
    tau_h: float
    lower: float
    upper: float
    method: str
    frequency: float = math.nan


def _bisect_tau(growth, lower: float, upper: float, tol: float, method: str) -> HopfResult:
    g_lo, _ = growth(lower)
    g_hi, omega = growth(upper)
    if g_lo >= 0.0 or g_hi <= 0.0:
        raise NoCrossingError(
            f"No stability change in tau bracket [{lower}, {upper}] ({method}: growth {g_lo:.3e} -> {g_hi:.3e})."
        )
    while upper - lower > tol:
        mid = 0.5 * (lower + upper)
        g_mid, w_mid = growth(mid)
        logger.debug(f"Hopf bisection ({method}): tau={mid:.5f} growth={g_mid:.3e}")
        if g_mid > 0.0:
            upper, omega = mid, w_mid
        else:
            lower = mid
    tau_h = 0.5 * (lower + upper)
    logger.info(f"Hopf threshold ({method}): tau_h in ({lower:.5f}, {upper:.5f})")
    return HopfResult(tau_h=tau_h, lower=lower, upper=upper, method=method, frequency=omega)


def find_hopf_tau(epsilon: float, a: float, b: float, theta: float, method: str = "nlep",
                  tau_bracket: tuple[float, float] = (0.05, 4.0), tol: float = HOPF_TAU_TOL, **options) -> HopfResult:
    if method not in HOPF_METHODS:
        raise ParameterDomainError(f"Unknown Hopf method '{method}'. Choose from {HOPF_METHODS}.")
    lower, upper = tau_bracket

    if method == "nlep":
        ctx = build_nlep_context(epsilon, a, b, theta, options.get("n_points"),
                                 options.get("include_higher_order", False))
        roots = {}

        def growth(tau):
            lam = leading_nlep_eigenvalue(ctx, tau, extra_seeds=list(roots.values())[-1:])
            roots[tau] = lam
            return lam.real, abs(lam.imag)

        result = _bisect_tau(growth, lower, upper, tol, method)
        check_far_field(roots[result.upper], ctx, result.upper)
        return result

    if method == "discretized":
        ss = discretized_steady_state(epsilon, a, b, theta, options.get("grid"))

        def growth(tau):
            params = ss.params.with_(tau=tau)
            A, B = assemble_linearization(ss, params, ss.grid)
            pair = rightmost_eigenvalues(A, B).rightmost_oscillatory()
            if pair is None:
                return -math.inf, math.nan
            return pair.real, abs(pair.imag)

    else:
        from .pdesim import SimConfig, measure_oscillation, run

        grid = options.get("grid") or linearization_grid(epsilon)
        t_end = float(options.get("t_end", 60.0))

        def growth(tau):
            params = ModelParams(a=a, b=b, theta=theta, epsilon=epsilon, tau=tau)
            sim = SimConfig(params=params, grid=grid, t_end=t_end, dt=float(options.get("dt", 1e-3)),
                            initial={"type": "steady", "x0": 0.0}, track_every=float(options.get("track_every", 0.02)))
            report = measure_oscillation(run(sim), (t_end / 3.0, t_end), deadband=0.0)
            return report.slope, 2.0 * math.pi / report.period

    return _bisect_tau(growth, lower, upper, tol, method)


def hopf_table(epsilons, thetas, a: float, b: float, methods=("nlep", "discretized"), **options) -> list[dict]:
    rows = []
    for epsilon in epsilons:
        for theta in thetas:
            row = {"epsilon": epsilon, "theta": theta, "a": a, "b": b}
            for method in HOPF_METHODS:
                key = f"tau_h_{'pde' if method == 'pde_bisect' else method}"
                if method not in methods:
                    row[key] = math.nan
                    continue
                try:
                    row[key] = find_hopf_tau(epsilon, a, b, theta, method, **options).tau_h
                except NoCrossingError as e:
                    logger.warning(f"{e}")
                    row[key] = math.nan
            rows.append(row)
    return rows


HOPF_COLUMNS = ("epsilon", "theta", "a", "b", "tau_h_nlep", "tau_h_discretized", "tau_h_pde")


def write_hopf_table(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.array([[row[c] for c in HOPF_COLUMNS] for row in rows], dtype=float).reshape(-1, len(HOPF_COLUMNS))
    np.savetxt(path, data, delimiter=",", header=",".join(HOPF_COLUMNS), comments="", fmt=CSV_FLOAT_FORMAT)
    return path
