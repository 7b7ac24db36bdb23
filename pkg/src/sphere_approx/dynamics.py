"""Geodesic flow on cone lattices: Siegel transforms of F_{r,c,A} and exact orbit integrals.

f_{r,c}(g_t x) = 1 exactly when |x_tilde| < c and ln[x] - r < t <= ln[x], so
the orbit integral over [0, T] is a finite sum of interval overlaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cone import make_g_t
from .counting import DirectionSet, Window, directions, polar_mask
from .points import LatticeDescriptor, tube_points


@dataclass(frozen=True)
class OrbitConfig:
    r: float
    w: Window
    A: DirectionSet | None = None
    lattice: LatticeDescriptor = field(default_factory=lambda: LatticeDescriptor(1))

    def __post_init__(self):
        if not (self.w.T > self.r > 0):
            raise ValueError("need T > r > 0")
        if self.A is not None and self.A.dim not in (None, self.lattice.n):
            raise ValueError("direction set dimension differs from the lattice")

    @property
    def n(self) -> int:
        return self.lattice.n


@dataclass
class ConePoints:
    """Lattice points with |x_tilde| < c (and direction in A) and 1 <= [x] < bound,
    ordered by (bracket, coordinates) so floating sums are reproducible."""

    x: np.ndarray
    log_bracket: np.ndarray


def f_points(lattice: LatticeDescriptor, c: float, log_upper: float, A: DirectionSet | None = None) -> ConePoints:
    """Points of the lattice in F_{log_upper, c, A}.

    On F_{s,c}: x_{n+2} - x_{n+1} = |x_tilde|^2/[x] <= c^2, hence x lies within
    sqrt(c^2 + c^4) of the ray through (u_{n+1}, 1) at heights below (e^s + c^2)/2.
    """
    n = lattice.n
    pole = np.zeros(n + 1)
    pole[-1] = 1.0
    eU = math.exp(log_upper)
    radius = math.sqrt(c * c + c**4) * (1 + 1e-9) + 1e-9
    pts = tube_points(lattice, pole, radius, 0.5 * (1 - 1e-9), (eU + c * c) / 2 * (1 + 1e-9) + 1e-9)
    X = pts.v if pts.exact else pts.x
    br = (X[:, -1] + X[:, -2]).astype(float)
    if pts.exact:
        rho2 = np.sum(X[:, :-2] ** 2, axis=1)
        ok = rho2 < c * c
    else:
        ok = np.sum(X[:, :-2] ** 2, axis=1) < c * c
    ok &= (br >= 1) & (br < eU)
    if A is not None:
        pol = polar_mask(X)
        good = ok & ~pol
        sub = np.zeros(X.shape[0], bool)
        sub[good] = A.contains(directions(X[good]))
        ok = good & sub
    X, br = X[ok], br[ok]
    order = np.lexsort(tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1)) + (br,))
    return ConePoints(X[order], np.log(br[order]))


def siegel_transform_at(lattice: LatticeDescriptor, r: float, c: float, A: DirectionSet | None = None) -> int:
    """f_hat(lattice) for f the indicator of F_{r,c,A}: the number of lattice points in it."""
    if not (r > 0 and c > 0):
        raise ValueError("need r > 0 and c > 0")
    return int(f_points(lattice, c, r, A).x.shape[0])


def _overlaps(L: np.ndarray, r: float, T: float) -> np.ndarray:
    """|[0, T] cap (L - r, L]| for each log-bracket L."""
    return np.clip(np.minimum(L, T) - np.maximum(L - r, 0.0), 0.0, None)


def exact_orbit_integral(cfg: OrbitConfig, upper: float | None = None) -> float:
    """Integral of f_hat_{r,c,A}(g_t lattice) over t in [0, upper] (default T), exactly."""
    T = cfg.w.T if upper is None else upper
    pts = f_points(cfg.lattice, cfg.w.c, T + cfg.r, cfg.A)
    return math.fsum(_overlaps(pts.log_bracket, cfg.r, T))


def riemann_orbit_integral(cfg: OrbitConfig, h: float = 1e-4, upper: float | None = None) -> float:
    """Midpoint-rule quadrature of the same integral, evaluating f_hat on the grid."""
    T = cfg.w.T if upper is None else upper
    pts = f_points(cfg.lattice, cfg.w.c, T + cfg.r, cfg.A)
    L = pts.log_bracket  # sorted
    steps = int(round(T / h))
    t = (np.arange(steps) + 0.5) * (T / steps)
    # f_hat(g_t lattice) = #{x : t <= ln[x] < t + r}
    counts = np.searchsorted(L, t + cfg.r, side="left") - np.searchsorted(L, t, side="left")
    return float(np.sum(counts)) * (T / steps)


@dataclass(frozen=True)
class ChainResult:
    count_inner: int  # #(F_{T,c,A} \ F_{r,c,A})
    integral: float  # int_0^T f_hat dt
    count_outer: int  # #F_{T+r,c,A}
    integral_short: float  # int_0^{T-r} f_hat dt
    count_T: int  # #F_{T,c,A}
    count_r: int  # #F_{r,c,A}
    r: float

    @property
    def first_chain(self) -> bool:
        tol = 1e-9 * (1 + self.count_outer)
        return self.count_inner <= self.integral / self.r + tol and self.integral / self.r <= self.count_outer + tol

    @property
    def second_chain(self) -> bool:
        tol = 1e-9 * (1 + self.count_outer)
        return self.integral_short / self.r <= self.count_T + tol and self.count_T <= self.integral / self.r + self.count_r + tol

    @property
    def passed(self) -> bool:
        return self.first_chain and self.second_chain


def orbit_chain_check(cfg: OrbitConfig) -> ChainResult:
    """Both orbit inequality chains, every quantity computed from one enumeration."""
    T, r = cfg.w.T, cfg.r
    pts = f_points(cfg.lattice, cfg.w.c, T + r, cfg.A)
    L = pts.log_bracket
    integral = math.fsum(_overlaps(L, r, T))
    short = math.fsum(_overlaps(L, r, T - r))
    return ChainResult(
        count_inner=int(np.sum((L >= r) & (L < T))),
        integral=integral,
        count_outer=int(L.shape[0]),
        integral_short=short,
        count_T=int(np.sum(L < T)),
        count_r=int(np.sum(L < r)),
        r=r,
    )


def birkhoff_slope(cfg: OrbitConfig) -> float:
    """(1/(T r)) int_0^T f_hat_{r,c,A}(g_t lattice) dt."""
    return exact_orbit_integral(cfg) / (cfg.w.T * cfg.r)


def flowed(lattice: LatticeDescriptor, s: float) -> LatticeDescriptor:
    """The lattice g_s lattice."""
    return lattice.then(make_g_t(s, lattice.n))
