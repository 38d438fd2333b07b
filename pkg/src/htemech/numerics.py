"""Special functions, quadrature and finite differences shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.integrate import simpson

_STD_NORMAL = NormalDist()

DEFAULT_GRID_POINTS = 2001
DEFAULT_FD_STEP = 1e-4


class NumericalDomainError(ValueError):
    """Raised when an argument lies outside a function's domain."""


class EvaluationError(ArithmeticError):
    """Raised when an integrand or stencil produces a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[lo, hi]`` with an odd number of points."""

    lo: float = 0.0
    hi: float = 1.0
    n_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise NumericalDomainError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise NumericalDomainError(f"n_points must be odd and >= 3, got {self.n_points}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, computed from ``erfc`` (absolute error ~1e-16)."""
    x = float(x)
    if not math.isfinite(x):
        raise NumericalDomainError(f"std_normal_cdf needs a finite argument, got {x}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def norm_cdf(x):
    """Vectorised standard normal CDF for arrays (no domain checks)."""
    return special.ndtr(x)


def std_normal_quantile(q: float) -> float:
    """Inverse of :func:`std_normal_cdf` on the open unit interval."""
    q = float(q)
    if not (0.0 < q < 1.0):
        raise NumericalDomainError(f"quantile needs 0 < q < 1, got {q}")
    return _STD_NORMAL.inv_cdf(q)


def student_t_two_sided_p(t, df):
    """Two-sided p-value ``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom.

    Uses the regularized incomplete beta function,
    ``p = I_{df/(df+t^2)}(df/2, 1/2)``, so it is exact at small ``df``.
    Accepts scalars or arrays; returns the same shape.
    """
    df_arr = np.asarray(df, dtype=float)
    if np.any(df_arr < 1) or np.any(~np.isfinite(df_arr)):
        raise NumericalDomainError(f"degrees of freedom must be >= 1, got {df}")
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = df_arr / (df_arr + t * t)
    p = special.betainc(df_arr / 2.0, 0.5, x)
    p = np.where(np.isinf(t), 0.0, p)
    if p.ndim == 0:
        return float(p)
    return p


def simpson_integrate(f: Callable, grid: Grid1D = Grid1D()) -> float:
    """Composite Simpson integral of ``f`` over ``grid``.

    ``f`` is called once with the full array of grid points and must return an
    array of the same length.
    """
    pts = grid.points
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape == ():
        vals = np.full_like(pts, float(vals))
    bad = ~np.isfinite(vals)
    if bad.any():
        at = float(pts[np.argmax(bad)])
        raise EvaluationError(f"integrand is not finite at {at}", point=at)
    return float(simpson(vals, x=pts))


def central_cross_partial(f: Callable[[float, float], float], x: float, z: float,
                          h: float = DEFAULT_FD_STEP) -> float:
    """Four-point central estimate of d^2 f / dx dz at ``(x, z)``."""
    stencil = (f(x + h, z + h), f(x + h, z - h), f(x - h, z + h), f(x - h, z - h))
    for v in stencil:
        if not math.isfinite(v):
            raise EvaluationError(f"non-finite stencil value near ({x}, {z})", point=(x, z))
    fpp, fpm, fmp, fmm = stencil
    return (fpp - fpm - fmp + fmm) / (4.0 * h * h)


def central_derivative(f: Callable[[float], float], x: float, h: float = DEFAULT_FD_STEP) -> float:
    lo, hi = f(x - h), f(x + h)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise EvaluationError(f"non-finite stencil value near {x}", point=x)
    return (hi - lo) / (2.0 * h)


def uniform_nodes(lo: float, hi: float, n: int):
    """Gauss-Legendre nodes and probability weights for U[lo, hi]."""
    t, w = leggauss(n)
    return lo + (hi - lo) * (t + 1.0) / 2.0, w / 2.0


def normal_nodes(mean: float, sd: float, n: int):
    """Gauss-Hermite nodes and probability weights for N(mean, sd^2)."""
    t, w = hermegauss(n)
    return mean + sd * t, w / w.sum()
