"""Parameter bundles, nondimensionalization, grids and field containers.

Every other module works in the normalized variables

    tau l_t = l_xx - (l k_x)_x + b l (a - l),
        k_t = eps^2 k_xx - k + k^theta l^(1-theta),   x in (-1, 1),

with zero-flux boundaries at x = +-1.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import CELLS_PER_EPSILON, MIN_GRID_CELLS
from .exceptions import ParameterDomainError, PositivityError

logger = logging.getLogger(__name__)

OUTER_LIMIT = math.pi ** 2 / 4.0


def _require_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ParameterDomainError(f"{name} must be a finite positive number, got {value!r}")


# --- PARAMETER BUNDLES ---
@dataclass(frozen=True)
class DimensionalParams:
    d_l: float
    d_k: float
    chi: float
    a_dim: float
    b_dim: float
    delta: float
    theta: float
    c: float
    ell_b: float

    def __post_init__(self):
        for name in ("d_l", "d_k", "chi", "a_dim", "b_dim", "delta", "theta", "c", "ell_b"):
            _require_positive(name, getattr(self, name))
        if not 0.0 < self.theta < 1.0:
            raise ParameterDomainError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.c < 1.0:
            raise ParameterDomainError(f"c must lie in (0, 1), got {self.c}")


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    theta: float
    epsilon: float
    tau: float = 0.0
    outer_valid: bool = field(init=False)

    def __post_init__(self):
        _require_positive("a", self.a)
        _require_positive("b", self.b)
        _require_positive("epsilon", self.epsilon)
        if not 0.0 <= self.theta < 1.0:
            raise ParameterDomainError(f"theta must lie in [0, 1), got {self.theta}")
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise ParameterDomainError(f"tau must be finite and nonnegative, got {self.tau}")
        object.__setattr__(self, "outer_valid", self.a * self.b < OUTER_LIMIT)

    @property
    def sqrt_ab(self) -> float:
        return math.sqrt(self.a * self.b)

    def require_outer_valid(self) -> None:
        if not self.outer_valid:
            raise ParameterDomainError(
                f"a*b = {self.a * self.b:.6g} violates a*b < pi^2/4; the outer cosine branch is not positive"
            )

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "theta": self.theta, "epsilon": self.epsilon, "tau": self.tau}


def nondimensionalize(p: DimensionalParams) -> ModelParams:
    scale = ((1.0 - p.c) / p.delta) ** (1.0 / (1.0 - p.theta))
    ell_tilde_sq = p.delta / p.d_l * p.ell_b ** 2
    a = p.a_dim * p.chi / (p.b_dim * p.d_l) * scale
    b = p.b_dim * p.d_l * ell_tilde_sq / (p.chi * p.delta * scale)
    epsilon = math.sqrt(p.d_k / (p.d_l * ell_tilde_sq))
    params = ModelParams(a=a, b=b, theta=p.theta, epsilon=epsilon, tau=ell_tilde_sq)
    logger.debug(f"Nondimensionalized {p} -> {params}")
    return params


# --- GRID ---
@dataclass(frozen=True)
class Grid:
    n: int
    x: np.ndarray
    dx: float

    def __post_init__(self):
        self.x.setflags(write=False)


def make_grid(n: int, epsilon: float | None = None) -> Grid:
    if int(n) != n or n < MIN_GRID_CELLS:
        raise ParameterDomainError(f"Grid needs an integer n >= {MIN_GRID_CELLS}, got {n!r}")
    n = int(n)
    dx = 2.0 / n
    x = -1.0 + (np.arange(n) + 0.5) * dx
    if epsilon is not None and n < CELLS_PER_EPSILON / epsilon:
        logger.warning(
            f"Grid with n={n} under-resolves the O(epsilon) core: need n >= {CELLS_PER_EPSILON / epsilon:.0f} "
            f"for epsilon={epsilon:g}."
        )
    return Grid(n=n, x=x, dx=dx)


# --- FIELDS ---
@dataclass(frozen=True)
class FieldPair:
    l: np.ndarray
    k: np.ndarray

    def validate(self) -> "FieldPair":
        if self.l.shape != self.k.shape:
            raise ValueError(f"Field shapes differ: {self.l.shape} vs {self.k.shape}")
        if not (np.all(np.isfinite(self.l)) and np.all(np.isfinite(self.k))):
            raise PositivityError("Fields contain non-finite samples.")
        if np.any(self.l <= 0.0) or np.any(self.k <= 0.0):
            raise PositivityError(
                f"Fields must be strictly positive (min l={self.l.min():.3e}, min k={self.k.min():.3e})."
            )
        return self

    def stack(self) -> np.ndarray:
        return np.concatenate([self.l, self.k])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "FieldPair":
        n = v.size // 2
        return cls(l=v[:n].copy(), k=v[n:].copy())

    def copy(self) -> "FieldPair":
        return FieldPair(l=self.l.copy(), k=self.k.copy())

    def mass(self, dx: float) -> float:
        return float(np.sum(self.l) * dx)

    @classmethod
    def homogeneous(cls, grid: Grid, l0: float, k0: float) -> "FieldPair":
        return cls(l=np.full(grid.n, float(l0)), k=np.full(grid.n, float(k0)))
