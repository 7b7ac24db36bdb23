"""Counting functions N_{T,c}(alpha), N_{T,c}(alpha; Delta), N_{T,c,A}(alpha, k).

Two independent routes are evaluated on every candidate point:

* direct: ||q alpha - p|| < c and 1 <= q < cosh T;
* rotated: k(p, q) in E_{T,c} with k a rotation taking alpha to the pole.

They agree in exact arithmetic; ``count_N`` raises ``ConsistencyError`` if
they disagree on any point that is not within the floating-point boundary
band (boundary points are decided once, in high precision, for both).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import brentq

from .cone import ConeVector, GroupElement, ValidationError, embed_K
from .points import (
    EPS,
    LatticeDescriptor,
    RationalApproximate,
    distance_band,
    hp_less,
    normalize_alpha,
    scan_near,
    tube_points,
)

GUARD = 1e-9


class ConsistencyError(RuntimeError):
    """The direct and rotated counting routes disagree off the boundary band."""


class PolarPointError(ValueError):
    """pi(x) is undefined: the first n coordinates of x vanish."""


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Window:
    """Flow time T (denominators q < cosh T) and approximation constant c."""

    T: float
    c: float

    def __post_init__(self):
        # T = 0 is the empty window (no q with 1 <= q < cosh 0)
        if not (self.T >= 0 and self.c > 0):
            raise ValueError("need T >= 0 and c > 0")
        if self.T > 700:
            raise ValueError("T > 700 overflows cosh T")

    @classmethod
    def from_cosh(cls, cosh_T: float, c: float) -> "Window":
        return cls(math.acosh(cosh_T), c)

    @property
    def cosh_T(self) -> float:
        return math.cosh(self.T)

    @property
    def exp_T(self) -> float:
        return math.exp(self.T)

    @property
    def q_max(self) -> int:
        """Largest integer candidate for q < cosh T (boundary decided separately)."""
        return math.floor(self.cosh_T * (1 + GUARD))


def _fmt(v) -> str:
    return ",".join(f"{x:g}" for x in v)


@dataclass(frozen=True)
class DirectionSet:
    """A subset of S^{n-1} with null boundary.

    Build with the class methods; ``contains`` takes unit vectors of shape
    (N, n) and ``measure`` is the normalized surface measure of the set.
    """

    kind: str
    vector: tuple = ()
    radius: float = 0.0
    children: tuple = ()

    @classmethod
    def full(cls) -> "DirectionSet":
        return cls("full")

    @classmethod
    def hemisphere(cls, axis) -> "DirectionSet":
        axis = tuple(float(v) for v in axis)
        if not any(axis):
            raise ValueError("hemisphere axis must be nonzero")
        return cls("hemisphere", axis)

    @classmethod
    def cap(cls, center, radius: float) -> "DirectionSet":
        center = np.asarray(center, dtype=float)
        if not (0 < radius <= math.pi):
            raise ValueError("cap radius must lie in (0, pi]")
        return cls("cap", tuple((center / np.linalg.norm(center)).tolist()), float(radius))

    @classmethod
    def orthant(cls, signs) -> "DirectionSet":
        signs = tuple(1 if s > 0 else -1 for s in signs)
        return cls("orthant", signs)

    @classmethod
    def complement(cls, child: "DirectionSet") -> "DirectionSet":
        return cls("complement", children=(child,))

    @classmethod
    def union(cls, *children: "DirectionSet") -> "DirectionSet":
        """Union of pairwise disjoint sets (the measure is additive)."""
        return cls("union", children=tuple(children))

    @property
    def dim(self) -> int | None:
        if self.vector:
            return len(self.vector)
        for ch in self.children:
            if ch.dim is not None:
                return ch.dim
        return None

    @property
    def measure(self) -> float:
        k = self.kind
        if k == "full":
            return 1.0
        if k == "hemisphere":
            return 0.5
        if k == "orthant":
            return 0.5 ** len(self.vector)
        if k == "cap":
            n = len(self.vector)
            th = self.radius
            if n == 1:
                return 1.0 if th > math.pi - 1e-15 else 0.5
            if n == 2:
                return th / math.pi
            if n == 3:
                return (1 - math.cos(th)) / 2
            raise ValueError("cap measure only for n <= 3")
        if k == "complement":
            return 1.0 - self.children[0].measure
        if k == "union":
            total = sum(ch.measure for ch in self.children)
            if total > 1 + 1e-12:
                raise ValueError("union children are not disjoint")
            return total
        raise ValueError(f"unknown direction set kind {k!r}")

    def contains(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        k = self.kind
        if self.vector and U.shape[1] != len(self.vector):
            raise ValueError(f"direction of dimension {U.shape[1]} for a set in dimension {len(self.vector)}")
        if k == "full":
            return np.ones(U.shape[0], bool)
        if k == "hemisphere":
            return U @ np.asarray(self.vector) > 0
        if k == "orthant":
            return np.all(U * np.asarray(self.vector) > 0, axis=1)
        if k == "cap":
            cosang = np.clip(U @ np.asarray(self.vector), -1.0, 1.0)
            return np.arccos(cosang) < self.radius
        if k == "complement":
            return ~self.children[0].contains(U)
        if k == "union":
            out = np.zeros(U.shape[0], bool)
            for ch in self.children:
                out |= ch.contains(U)
            return out
        raise ValueError(f"unknown direction set kind {k!r}")

    def describe(self) -> str:
        k = self.kind
        if k == "full":
            return "full"
        if k == "hemisphere":
            return f"hemisphere({_fmt(self.vector)})"
        if k == "orthant":
            return "orthant(" + ",".join("+" if s > 0 else "-" for s in self.vector) + ")"
        if k == "cap":
            return f"cap({_fmt(self.vector)};{self.radius:g})"
        if k == "complement":
            return f"complement({self.children[0].describe()})"
        return "union(" + "|".join(ch.describe() for ch in self.children) + ")"


def quadrants() -> list[DirectionSet]:
    return [DirectionSet.orthant(s) for s in [(1, 1), (-1, 1), (-1, -1), (1, -1)]]


def parse_direction_set(text: str) -> DirectionSet:
    """Inverse of ``DirectionSet.describe``."""
    text = text.strip()
    if text == "full":
        return DirectionSet.full()
    head, _, rest = text.partition("(")
    if not rest.endswith(")"):
        raise ValueError(f"cannot parse direction set {text!r}")
    body = rest[:-1]
    if head == "hemisphere":
        return DirectionSet.hemisphere([float(v) for v in body.split(",")])
    if head == "orthant":
        return DirectionSet.orthant([1 if s.strip() == "+" else -1 for s in body.split(",")])
    if head == "cap":
        ctr, _, rad = body.partition(";")
        return DirectionSet.cap([float(v) for v in ctr.split(",")], float(rad))
    if head == "complement":
        return DirectionSet.complement(parse_direction_set(body))
    if head == "union":
        parts, depth, cur = [], 0, ""
        for ch in body:
            if ch == "|" and depth == 0:
                parts.append(cur)
                cur = ""
                continue
            depth += ch == "("
            depth -= ch == ")"
            cur += ch
        parts.append(cur)
        return DirectionSet.union(*[parse_direction_set(p) for p in parts])
    raise ValueError(f"cannot parse direction set {text!r}")


@dataclass
class CountReport:
    total: int
    primitive_total: int
    points: list
    window: Window
    direction: DirectionSet | None
    alpha: np.ndarray
    lattice: LatticeDescriptor
    boundary_hits: int = 0
    elapsed: float = 0.0
    polar: int = 0
    degenerate: bool = False

    def __post_init__(self):
        assert self.total == len(self.points)
        assert self.primitive_total <= self.total


def shrunk_c(c: float, ell: float) -> float:
    """c_ell = c (1 - c^2 / 2 ell)^{1/2}."""
    val = 1 - c * c / (2 * ell)
    if val <= 0:
        raise ValueError("ell must exceed c^2 / 2")
    return c * math.sqrt(val)


@dataclass(frozen=True)
class SandwichConstants:
    """r_0, ell, c_ell and the compact heights c^2 + 1, ell for a given c.

    r_0 = ln 2 + c^2 makes 2 cosh T < e^{T + r_0} for every T; the second
    requirement 2 cosh(T - r_0) + c^2 <= 2 cosh T holds exactly for T >= T_min.
    """

    c: float
    ell: int
    r0: float
    c_ell: float
    C0_height: float
    Cl_height: float
    T_min: float

    @classmethod
    def for_c(cls, c: float, ell: int | None = None, r0: float | None = None) -> "SandwichConstants":
        c2 = Fraction(c) ** 2
        if ell is None:
            ell = 2 * math.ceil(c2) + 2
        if not ell > c2 + 1:
            raise ValueError("ell must exceed c^2 + 1")
        if r0 is None:
            r0 = math.log(2) + float(c2)
        c_ell = shrunk_c(c, ell)

        def gap(T):
            return 2 * math.cosh(T) - 2 * math.cosh(T - r0) - float(c2)

        # gap is strictly increasing with gap(r0/2) = -c^2 < 0
        hi = r0 / 2 + 1.0
        while gap(hi) <= 0:
            hi = 2 * hi + 1
        t_min = brentq(gap, r0 / 2, hi, xtol=1e-14)
        return cls(float(c), int(ell), float(r0), c_ell, float(c2) + 1, float(ell), t_min)

    @property
    def c2(self) -> Fraction:
        return Fraction(self.c) ** 2

    @property
    def c_ell2(self) -> Fraction:
        return self.c2 * (1 - self.c2 / (2 * self.ell))

    @property
    def T_valid(self) -> float:
        return max(self.T_min, self.r0)


# --------------------------------------------------------------------------
# rotation to the pole


def rotation_matrix_to_pole(alpha) -> np.ndarray:
    """R in SO(n+1) with R alpha = u_{n+1}; rotation in span{alpha, u_{n+1}}."""
    a = normalize_alpha(alpha)
    m = a.shape[0]
    e = np.zeros(m)
    e[-1] = 1.0
    cos_t = float(a[-1])
    perp = a.copy()
    perp[-1] = 0.0
    sin_t = float(np.linalg.norm(perp))
    if sin_t < 1e-15:
        if cos_t > 0:
            return np.eye(m)
        R = np.eye(m)
        R[0, 0] = -1.0
        R[-1, -1] = -1.0
        return R
    v = perp / sin_t
    R = np.eye(m) + (cos_t - 1) * (np.outer(e, e) + np.outer(v, v)) + sin_t * (np.outer(e, v) - np.outer(v, e))
    return R


def rotation_to_pole(alpha) -> GroupElement:
    return embed_K(rotation_matrix_to_pole(alpha))


# --------------------------------------------------------------------------
# exact / guarded membership on arrays


def _mp_cosh(T):
    with mpmath.workdps(50):
        return mpmath.cosh(mpmath.mpf(T))


def _mp_exp(T):
    with mpmath.workdps(50):
        return mpmath.exp(mpmath.mpf(T))


def _lt_transcendental(vals: np.ndarray, bound: float, mp_bound, mp_vals=None) -> tuple[np.ndarray, int]:
    """vals < bound, re-deciding entries within GUARD (relative) of the bound in high precision."""
    vals = np.asarray(vals)
    mask = vals.astype(float) < bound
    near = np.abs(vals.astype(float) - bound) <= GUARD * max(1.0, abs(bound))
    hits = 0
    if np.any(near):
        b = mp_bound()
        for i in np.flatnonzero(near):
            hits += 1
            v = mp_vals(i) if mp_vals is not None else mpmath.mpf(int(vals[i]) if vals.dtype.kind in "iu" else float(vals[i]))
            with mpmath.workdps(50):
                mask[i] = bool(v < b)
    return mask, hits


def _ceil_threshold(c2: Fraction) -> float:
    # for integer z: z < c2  <=>  z < ceil(c2)
    return float(math.ceil(c2))


def _int_products(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact when |a*b| < 2^53; larger values only need to be recognised as large
    return a.astype(float) * b.astype(float)


def e_mask(X: np.ndarray, T: float, c2) -> tuple[np.ndarray, int]:
    """Membership in E_{T,c}: 2 x_{n+2}(x_{n+2} - x_{n+1}) < c^2, 1 <= x_{n+2} < cosh T."""
    X = np.atleast_2d(X)
    h, s = X[:, -1], X[:, -2]
    if X.dtype.kind in "iu":
        c2 = Fraction(c2)
        lhs = 2.0 * _int_products(h, h - s)
        ok = lhs < _ceil_threshold(c2)
        ok &= h >= 1
        below, hits = _lt_transcendental(h, math.cosh(T), lambda: _mp_cosh(T))
        return ok & below, hits
    c2 = float(c2)
    gap = _stable_gap(X)
    ok = 2.0 * h * gap < c2
    ok &= h >= 1
    below, hits = _lt_transcendental(h, math.cosh(T), lambda: _mp_cosh(T))
    return ok & below, hits


def _stable_gap(X: np.ndarray) -> np.ndarray:
    """x_{n+2} - x_{n+1} without cancellation: |x_tilde|^2 / [x] when x_{n+1} > 0."""
    h, s = X[:, -1], X[:, -2]
    rho2 = np.sum(X[:, :-2] ** 2, axis=1)
    br = h + s
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(s > 0, rho2 / np.where(br > 0, br, 1.0), h - s)
    return gap


def f_mask(X: np.ndarray, T: float, c2) -> tuple[np.ndarray, int]:
    """Membership in F_{T,c}: x_{n+2}^2 - x_{n+1}^2 < c^2, 1 <= [x] < e^T."""
    X = np.atleast_2d(X)
    h, s = X[:, -1], X[:, -2]
    br = h + s
    if X.dtype.kind in "iu":
        c2 = Fraction(c2)
        lhs = _int_products(h - s, br)
        ok = (lhs < _ceil_threshold(c2)) & (br >= 1)
    else:
        rho2 = np.sum(X[:, :-2] ** 2, axis=1)
        ok = (rho2 < float(c2)) & (br >= 1)
    below, hits = _lt_transcendental(br, math.exp(T), lambda: _mp_exp(T))
    return ok & below, hits


def polar_mask(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    if X.dtype.kind in "iu":
        return np.all(X[:, :-2] == 0, axis=1)
    tol = 64 * EPS * (np.abs(X[:, -1]) + 1.0)
    return np.linalg.norm(X[:, :-2], axis=1) <= tol


def directions(X: np.ndarray) -> np.ndarray:
    """pi(x) for each row; rows with undefined direction are returned as NaN."""
    X = np.atleast_2d(X)
    T = X[:, :-2].astype(float)
    nrm = np.linalg.norm(T, axis=1)
    out = np.full_like(T, np.nan)
    ok = ~polar_mask(X)
    out[ok] = T[ok] / nrm[ok, None]
    return out


def _coords(x) -> np.ndarray:
    if isinstance(x, ConeVector):
        if x.integer_flag:
            return np.array([int(v) for v in x.coords], dtype=np.int64)
        return x.as_float()
    arr = np.asarray(x)
    return arr if arr.dtype.kind in "iuf" else arr.astype(float)


def in_E(x, w: Window) -> bool:
    return bool(e_mask(_coords(x)[None, :], w.T, Fraction(w.c) ** 2)[0][0])


def in_F(x, w: Window) -> bool:
    return bool(f_mask(_coords(x)[None, :], w.T, Fraction(w.c) ** 2)[0][0])


def direction(x) -> np.ndarray:
    X = _coords(x)[None, :]
    if polar_mask(X)[0]:
        raise PolarPointError("polar point: pi(x) is undefined")
    return directions(X)[0]


# --------------------------------------------------------------------------
# counting


@dataclass
class Candidates:
    """Lattice points near the ray through (alpha, 1), with both routes' inputs.

    ``d`` is the displacement x_{n+2} alpha - x_bar; ``rot`` the rotated points
    k x computed from the displacement so that the E-test is well conditioned.
    """

    alpha: np.ndarray
    lattice: LatticeDescriptor
    v: np.ndarray
    x: np.ndarray
    exact: bool
    R: np.ndarray
    d: np.ndarray = field(init=False)
    d2: np.ndarray = field(init=False)
    rot: np.ndarray = field(init=False)

    def __post_init__(self):
        h = self.x[:, -1]
        xbar = self.x[:, :-1]
        self.d = h[:, None] * self.alpha[None, :] - xbar
        self.d2 = np.sum(self.d**2, axis=1)
        n = self.alpha.shape[0] - 1
        rd = self.d @ self.R.T
        rot = np.empty_like(self.x)
        rot[:, :n] = -rd[:, :n]
        rot[:, n] = xbar @ self.R[n]
        rot[:, n + 1] = h
        self.rot = rot

    def __len__(self) -> int:
        return int(self.v.shape[0])

    @property
    def heights(self) -> np.ndarray:
        return self.v[:, -1] if self.exact else self.x[:, -1]

    def _hp_d2(self, i: int):
        """High-precision ||x_{n+2} alpha - x_bar||^2 for candidate i."""
        with mpmath.workdps(50):
            a = [mpmath.mpf(float(t)) for t in self.alpha]
            nrm = mpmath.sqrt(mpmath.fsum(t * t for t in a))
            a = [t / nrm for t in a]
            v = [mpmath.mpf(int(t)) for t in self.v[i]]
            if self.exact:
                x = v
            else:
                g = self.lattice.matrix
                x = [mpmath.fsum(mpmath.mpf(float(g[r, j])) * v[j] for j in range(len(v))) for r in range(len(v))]
            h = x[-1]
            return mpmath.fsum((h * a[j] - x[j]) ** 2 for j in range(len(a)))

    def heights_below(self, T: float) -> tuple[np.ndarray, int]:
        h = self.heights
        if self.exact:
            return _lt_transcendental(h, math.cosh(T), lambda: _mp_cosh(T))
        g = self.lattice.matrix

        def mp_h(i):
            with mpmath.workdps(50):
                return mpmath.fsum(mpmath.mpf(float(g[-1, j])) * int(self.v[i, j]) for j in range(self.v.shape[1]))

        return _lt_transcendental(h, math.cosh(T), lambda: _mp_cosh(T), mp_h)

    def direct(self, c: float, T: float) -> tuple[np.ndarray, np.ndarray]:
        """(solution mask, boundary mask) for ||q alpha - p|| < c, 1 <= q < cosh T."""
        m = self.alpha.shape[0]
        band = distance_band(self.heights, c, m)
        c2 = c * c
        inside = self.d2 < c2
        unsure = np.abs(self.d2 - c2) <= band
        below, _ = self.heights_below(T)
        h = self.heights
        ok = below & (h >= 1 if self.exact else h >= 1.0)
        for i in np.flatnonzero(unsure & ok):
            inside[i] = hp_less(self._hp_d2(i), c)
        return ok & inside, unsure

    def rotated(self, c: float, T: float) -> tuple[np.ndarray, np.ndarray]:
        """(solution mask, boundary mask) for k x in E_{T,c}."""
        m = self.alpha.shape[0]
        X = self.rot
        h = X[:, -1]
        gap = _stable_gap(X)
        val = 2.0 * h * gap
        band = 4 * distance_band(self.heights, c, m)
        c2 = c * c
        inside = val < c2
        unsure = np.abs(val - c2) <= band
        below, _ = self.heights_below(T)
        ok = below & (h >= 1.0)
        for i in np.flatnonzero(unsure & ok):
            inside[i] = hp_less(self._hp_d2(i), c)
        return ok & inside, unsure


def find_candidates(alpha, w: Window, lattice: LatticeDescriptor, R: np.ndarray | None = None, keep: float | None = None) -> Candidates:
    """Superset of the solutions of ||q alpha - p|| < c, 1 <= q < cosh T in the lattice."""
    a = normalize_alpha(alpha)
    if lattice.n != a.shape[0] - 1:
        raise ValidationError("alpha and lattice dimensions differ")
    if R is None:
        R = rotation_matrix_to_pole(a)
    radius = keep if keep is not None else 1.25 * w.c + 0.1
    h_hi = w.cosh_T * (1 + GUARD)
    if lattice.is_standard:
        s = scan_near(a, radius, 1, math.floor(h_hi), keep=radius)
        v = np.concatenate([s.P, s.q[:, None]], axis=1).astype(np.int64)
        return Candidates(a, lattice, v, v.astype(float), True, R)
    pts = tube_points(lattice, a, radius, 1 - GUARD, h_hi)
    return Candidates(a, lattice, pts.v, pts.x, False, R)


def _check_k(k: GroupElement, alpha: np.ndarray) -> np.ndarray:
    R = k.matrix[:-1, :-1]
    if np.max(np.abs(k.matrix[-1, :-1])) > 1e-12 or np.max(np.abs(k.matrix[:-1, -1])) > 1e-12:
        raise ValidationError("k must lie in K")
    e = np.zeros(alpha.shape[0])
    e[-1] = 1.0
    if np.linalg.norm(R @ alpha - e) > 1e-9:
        raise ValidationError("k does not take alpha to the pole")
    return R


@dataclass
class Solution:
    """Solutions of the counting system among the candidates, after the cross-check."""

    cand: Candidates
    sol: np.ndarray
    polar: np.ndarray
    boundary_hits: int

    def directions(self) -> np.ndarray:
        """pi(k x) for the non-polar solutions."""
        return directions(self.cand.rot[self.sol & ~self.polar])


def solve(alpha, w: Window, lattice: LatticeDescriptor | None = None, k: GroupElement | None = None) -> Solution:
    """Evaluate both counting routes on a common candidate set; raise on disagreement."""
    a = normalize_alpha(alpha)
    if lattice is None:
        lattice = LatticeDescriptor(a.shape[0] - 1)
    R = rotation_matrix_to_pole(a) if k is None else _check_k(k, a)
    cand = find_candidates(a, w, lattice, R)
    sol, unsure_d = cand.direct(w.c, w.T)
    sol_e, unsure_e = cand.rotated(w.c, w.T)
    boundary = unsure_d | unsure_e
    bad = (sol != sol_e) & ~boundary
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ConsistencyError(f"direct and rotated routes disagree at v={cand.v[i].tolist()}")
    # off the band the routes agree; on it both used the same high-precision decision
    sol = sol & sol_e
    below, _ = cand.heights_below(w.T)
    hits = int(np.sum(boundary & below))
    return Solution(cand, sol, polar_mask(cand.rot) & sol, hits)


def count_N(alpha, w: Window, lattice: LatticeDescriptor | None = None, A: DirectionSet | None = None, k: GroupElement | None = None) -> CountReport:
    """N_{T,c}(alpha; Delta), or N_{T,c,A}(alpha, k; Delta) when A is given."""
    t0 = time.perf_counter()
    res = solve(alpha, w, lattice, k)
    cand = res.cand
    keep = res.sol.copy()
    if A is not None:
        keep &= ~res.polar
        idx = np.flatnonzero(keep)
        keep[idx[~A.contains(directions(cand.rot[idx]))]] = False
    prim = _primitive(cand.v)
    if cand.exact:
        pts = [RationalApproximate(tuple(row[:-1]), int(row[-1]), bool(f)) for row, f in zip(cand.v[keep].tolist(), prim[keep])]
    else:
        pts = [ConeVector(row, check=False) for row in cand.x[keep]]
    return CountReport(
        total=int(keep.sum()),
        primitive_total=int((prim & keep).sum()),
        points=pts,
        window=w,
        direction=A,
        alpha=cand.alpha,
        lattice=cand.lattice,
        boundary_hits=res.boundary_hits,
        elapsed=time.perf_counter() - t0,
        polar=int(res.polar.sum()),
        degenerate=w.c >= 1,
    )


def directional_counts(alpha, w: Window, sets: Sequence[DirectionSet], lattice: LatticeDescriptor | None = None, k: GroupElement | None = None) -> tuple[list[int], int, int]:
    """(count per direction set, non-polar total, polar total) from one solve."""
    res = solve(alpha, w, lattice, k)
    U = res.directions()
    return [int(A.contains(U).sum()) for A in sets], int(U.shape[0]), int(res.polar.sum())


def _primitive(v: np.ndarray) -> np.ndarray:
    if v.shape[0] == 0:
        return np.zeros(0, bool)
    g = np.abs(v[:, -1])
    for j in range(v.shape[1] - 1):
        g = np.gcd(g, v[:, j])
    return g == 1


@dataclass
class CountTable:
    """Counts over a (c, T) grid for one alpha, from a single scan.

    All arrays have shape (len(c_list), len(T_grid)).
    """

    alpha: np.ndarray
    c_list: tuple
    T_grid: tuple
    total: np.ndarray
    primitive: np.ndarray
    polar: np.ndarray
    boundary_hits: np.ndarray
    elapsed: float


def count_table(alpha, c_list: Sequence[float], T_grid: Sequence[float], lattice: LatticeDescriptor | None = None, *, cross_check: bool = True) -> CountTable:
    """N_{T,c}(alpha; Delta) for every c in c_list and T in T_grid.

    One scan at the largest (c, T) supplies all cells. With ``cross_check``
    the rotated E-route is evaluated for every cell as in ``count_N``.
    """
    t0 = time.perf_counter()
    a = normalize_alpha(alpha)
    if lattice is None:
        lattice = LatticeDescriptor(a.shape[0] - 1)
    shape = (len(c_list), len(T_grid))
    tot, ptot, pol, hits = (np.zeros(shape, np.int64) for _ in range(4))
    if not len(c_list) or not len(T_grid):
        return CountTable(a, tuple(c_list), tuple(T_grid), tot, ptot, pol, hits, 0.0)
    cmax, Tmax = max(c_list), max(T_grid)
    cand = find_candidates(a, Window(Tmax, cmax), lattice, keep=cmax * 1.05 + 0.05)
    prim = _primitive(cand.v)
    polar = polar_mask(cand.rot)
    for j, T in enumerate(T_grid):
        below, _ = cand.heights_below(T)
        for i, c in enumerate(c_list):
            sol, ud = cand.direct(c, T)
            if cross_check:
                sol_e, ue = cand.rotated(c, T)
                if np.any((sol != sol_e) & ~(ud | ue)):
                    raise ConsistencyError(f"routes disagree for c={c}, T={T}")
                ud = ud | ue
                sol = sol & sol_e
            hits[i, j] = int(np.sum(ud & below))
            tot[i, j] = int(sol.sum())
            ptot[i, j] = int((sol & prim).sum())
            pol[i, j] = int((sol & polar).sum())
    return CountTable(a, tuple(c_list), tuple(T_grid), tot, ptot, pol, hits, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# sandwich


@dataclass(frozen=True)
class Violation:
    point: tuple
    inclusion: str  # "inner": F_{T-r0,c_ell,A} \ C_ell within E_{T,c,A} \ C_0; "outer": E \ C_0 within F_{T+r0,c,A}


def _direction_ok(X: np.ndarray, A: DirectionSet | None) -> np.ndarray:
    if A is None:
        return np.ones(X.shape[0], bool)
    ok = ~polar_mask(X)
    out = np.zeros(X.shape[0], bool)
    out[ok] = A.contains(directions(X[ok]))
    return out


def sandwich_masks(X: np.ndarray, w: Window, consts: SandwichConstants, A: DirectionSet | None = None):
    """Boolean masks (inner_violation, outer_violation) for the rows of X."""
    if w.T < consts.T_min or w.T <= consts.r0:
        raise ValueError(f"sandwich needs T > r0 = {consts.r0:.4f} and T >= T_min = {consts.T_min:.4f}")
    X = np.atleast_2d(X)
    dir_ok = _direction_ok(X, A)
    h = X[:, -1]
    if X.dtype.kind in "iu":
        in_C0 = h <= math.floor(consts.c2 + 1)
        in_Cl = h <= consts.ell
    else:
        in_C0 = h <= float(consts.c2) + 1
        in_Cl = h <= consts.ell
    E = e_mask(X, w.T, consts.c2)[0] & dir_ok
    F_in = f_mask(X, w.T - consts.r0, consts.c_ell2)[0] & dir_ok
    F_out = f_mask(X, w.T + consts.r0, consts.c2)[0] & dir_ok
    inner = F_in & ~in_Cl & ~(E & ~in_C0)
    outer = E & ~in_C0 & ~F_out
    return inner, outer


def sandwich_check(points, w: Window, consts: SandwichConstants, A: DirectionSet | None = None) -> list[Violation]:
    """Points violating either inclusion F_{T-r0,c_l,A}\\C_l in E_{T,c,A}\\C_0 in F_{T+r0,c,A}."""
    if isinstance(points, np.ndarray):
        X = points
    else:
        rows = [_coords(p) for p in points]
        if not rows:
            return []
        X = np.array(rows)
    inner, outer = sandwich_masks(X, w, consts, A)
    out = [Violation(tuple(X[i].tolist()), "inner") for i in np.flatnonzero(inner)]
    out += [Violation(tuple(X[i].tolist()), "outer") for i in np.flatnonzero(outer)]
    return out
