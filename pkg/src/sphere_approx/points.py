"""Integer points on the light cone: ||p|| = q, globally and near a ray q(alpha, 1).

Points are exact int64 arrays internally; ``RationalApproximate`` is the
per-point record handed to callers. Transformed lattices g Lambda_0 are
handled by enumerating Lambda_0 in a region that provably contains the
preimage and filtering afterwards.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from . import _kernels
from .cone import ConeVector, DimensionError, GroupElement, ValidationError, check_n, identity

Q_MAX = 3 * 10**9
EPS = np.finfo(float).eps
_BUFFER = 1 << 14


class RangeError(ValueError):
    """Heights beyond the exact int64 range (q^2 must fit in 64 bits)."""


@dataclass(frozen=True)
class RationalApproximate:
    p: tuple
    q: int
    primitive: bool

    def __post_init__(self):
        p = tuple(int(v) for v in self.p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", int(self.q))
        if self.q <= 0:
            raise ValidationError("q must be positive")
        if sum(v * v for v in p) != self.q * self.q:
            raise ValidationError(f"||p|| != q for p={p}, q={self.q}")
        if bool(self.primitive) != (math.gcd(self.q, *p) == 1):
            raise ValidationError("primitive flag disagrees with gcd")

    @classmethod
    def make(cls, p, q) -> "RationalApproximate":
        p = tuple(int(v) for v in p)
        return cls(p, int(q), math.gcd(int(q), *p) == 1)

    @property
    def n(self) -> int:
        return len(self.p) - 1

    def cone_vector(self) -> ConeVector:
        return ConeVector(list(self.p) + [self.q], check=False)


def is_primitive(a: RationalApproximate) -> bool:
    return math.gcd(a.q, *a.p) == 1


@dataclass(frozen=True)
class LatticeDescriptor:
    """The lattice g Lambda_0 in the cone; ``transform=None`` means Lambda_0."""

    n: int
    transform: GroupElement | None = None

    def __post_init__(self):
        check_n(self.n)
        if self.transform is not None:
            if self.transform.n != self.n:
                raise DimensionError("transform dimension does not match n")
            self.transform.validate()
            if self.transform.is_identity():
                object.__setattr__(self, "transform", None)

    @classmethod
    def of(cls, g: GroupElement) -> "LatticeDescriptor":
        return cls(g.n, g)

    @property
    def is_standard(self) -> bool:
        return self.transform is None

    @property
    def matrix(self) -> np.ndarray:
        return identity(self.n).matrix if self.transform is None else self.transform.matrix

    def then(self, g: GroupElement) -> "LatticeDescriptor":
        """The lattice g Delta."""
        return LatticeDescriptor(self.n, GroupElement(g.matrix @ self.matrix, check=False))

    def describe(self) -> str:
        if self.transform is None:
            return "Lambda0"
        vals = ";".join(f"{v:.6g}" for v in self.transform.matrix.ravel())
        return f"g[{vals}]"


def primitive_mask(q: np.ndarray, P: np.ndarray) -> np.ndarray:
    g = np.abs(q).astype(np.int64)
    for j in range(P.shape[1]):
        g = np.gcd(g, P[:, j])
    return g == 1


def _check_height(q_hi: int) -> None:
    if q_hi > Q_MAX:
        raise RangeError(f"height {q_hi} exceeds the exact range q <= {Q_MAX}")


# --------------------------------------------------------------------------
# global enumeration


def all_points_array(q_max: int, n: int, q_min: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(q, P) for every integer cone point with q_min <= q <= q_max, ordered by (q, p)."""
    check_n(n)
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    _check_height(q_max)
    m = n + 1
    q_min = max(1, int(q_min))
    if q_max < q_min:
        return np.zeros(0, np.int64), np.zeros((0, m), np.int64)
    dq = np.zeros(0, np.int64)
    dp = np.zeros((0, m), np.int64)
    cnt = _kernels.sphere_points(q_min, int(q_max), m, dq, dp, False)
    out_q = np.empty(cnt, np.int64)
    out_p = np.empty((cnt, m), np.int64)
    _kernels.sphere_points(q_min, int(q_max), m, out_q, out_p, True)
    return out_q, out_p


def enumerate_all(q_max: int, n: int) -> list[RationalApproximate]:
    q, P = all_points_array(q_max, n)
    prim = primitive_mask(q, P)
    return [RationalApproximate(tuple(p), int(qq), bool(f)) for qq, p, f in zip(q, P.tolist(), prim)]


# --------------------------------------------------------------------------
# localized enumeration


@dataclass
class NearScan:
    """Result of a localized scan around the ray through (alpha, 1).

    ``q``/``P`` hold every accepted point, ``d2`` the squared distance
    ||q alpha - p||^2; ``boundary_hits`` counts points whose acceptance had to
    be decided in high precision.
    """

    alpha: np.ndarray
    c: float
    q: np.ndarray
    P: np.ndarray
    d2: np.ndarray
    boundary_hits: int = 0
    degenerate: bool = False
    inside: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.q.shape[0])

    def primitive(self) -> np.ndarray:
        return primitive_mask(self.q, self.P)

    def approximates(self) -> list[RationalApproximate]:
        prim = self.primitive()
        return [RationalApproximate(tuple(p), int(q), bool(f)) for q, p, f in zip(self.q, self.P.tolist(), prim)]


def normalize_alpha(alpha, tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(alpha, dtype=float).ravel()
    check_n(a.shape[0] - 1)
    nrm = float(np.linalg.norm(a))
    if abs(nrm - 1.0) > tol:
        raise ValidationError(f"alpha must be a unit vector (norm {nrm!r})")
    return a / nrm


def distance_band(q, c: float, m: int):
    """Half-width of the band around c^2 where the float distance is not trusted."""
    return np.maximum(1e-9 * c * c, 16.0 * m * EPS * (np.asarray(q, dtype=float) + 1.0) * (c + 1.0))


def hp_distance2(alpha: np.ndarray, p, q) -> mpmath.mpf:
    """||q alpha/|alpha| - p||^2 evaluated with 50 significant digits."""
    with mpmath.workdps(50):
        a = [mpmath.mpf(float(v)) for v in alpha]
        nrm = mpmath.sqrt(mpmath.fsum(v * v for v in a))
        q = mpmath.mpf(int(q))
        return mpmath.fsum((q * v / nrm - int(pi)) ** 2 for v, pi in zip(a, p))


def hp_less(value, bound: float) -> bool:
    with mpmath.workdps(50):
        return bool(mpmath.mpf(value) < mpmath.mpf(bound) ** 2)


def _raw_scan(alpha: np.ndarray, keep2: float, q_lo: int, q_hi: int):
    m = alpha.shape[0]
    solve = int(np.argmax(np.abs(alpha)))
    kern = _kernels.near_scan_2 if m == 2 else _kernels.near_scan
    cap = _BUFFER
    while True:
        out_q = np.empty(cap, np.int64)
        out_p = np.empty((cap, m), np.int64)
        out_d2 = np.empty(cap)
        cnt = kern(alpha, keep2, q_lo, q_hi, solve, out_q, out_p, out_d2)
        if cnt <= cap:
            return out_q[:cnt], out_p[:cnt], out_d2[:cnt]
        cap = int(cnt)


def _chunks(q_lo: int, q_hi: int, parts: int) -> list[tuple[int, int]]:
    if parts <= 1 or q_hi - q_lo < 1024:
        return [(q_lo, q_hi)]
    edges = np.linspace(q_lo, q_hi + 1, parts + 1).astype(np.int64)
    return [(int(a), int(b) - 1) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def scan_near(alpha, c: float, q_lo: int, q_hi: int, *, keep: float | None = None, threads: int = 1) -> NearScan:
    """All (p, q) with ||p|| = q, q_lo <= q <= q_hi and ||q alpha - p|| < c.

    With ``keep`` > c the scan also returns points out to radius ``keep``
    (they fail the c-test but are useful as a candidate superset); the
    returned ``d2`` lets the caller apply its own threshold.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if q_lo < 1 or q_hi < q_lo:
        a = normalize_alpha(alpha)
        m = a.shape[0]
        return NearScan(a, c, np.zeros(0, np.int64), np.zeros((0, m), np.int64), np.zeros(0), inside=np.zeros(0, bool))
    _check_height(q_hi)
    a = normalize_alpha(alpha)
    m = a.shape[0]
    radius = c if keep is None else max(c, keep)
    band_max = float(distance_band(q_hi, radius, m))
    keep2 = radius * radius + band_max
    parts = _chunks(int(q_lo), int(q_hi), threads)
    if len(parts) == 1:
        results = [_raw_scan(a, keep2, *parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda r: _raw_scan(a, keep2, *r), parts))
    q = np.concatenate([r[0] for r in results])
    P = np.concatenate([r[1] for r in results])
    d2 = np.concatenate([r[2] for r in results])

    band = distance_band(q, c, m)
    sure_in = d2 < c * c - band
    unsure = (~sure_in) & (d2 < c * c + band)
    accept = sure_in.copy()
    hits = 0
    for i in np.flatnonzero(unsure):
        hits += 1
        accept[i] = hp_less(hp_distance2(a, P[i], q[i]), c)
    if keep is None or keep <= c:
        q, P, d2, accept = q[accept], P[accept], d2[accept], accept[accept]
    order = np.lexsort(tuple(P[:, j] for j in range(m - 1, -1, -1)) + (q,))
    return NearScan(a, c, q[order], P[order], d2[order], hits, bool(c >= q_lo), accept[order])


def _exact_near(alpha: Sequence[Rational], c, q_lo: int, q_hi: int) -> list[RationalApproximate]:
    a = [Fraction(v) for v in alpha]
    if sum(v * v for v in a) != 1:
        raise ValidationError("exact alpha must satisfy ||alpha|| = 1 exactly")
    c2 = Fraction(c) ** 2
    m = len(a)
    check_n(m - 1)
    rc = math.isqrt(math.ceil(c2)) + 1
    out = []
    for q in range(q_lo, q_hi + 1):
        centers = [q * v for v in a]
        ranges = [range(math.floor(t) - rc, math.ceil(t) + rc + 1) for t in centers]
        for p in _product(ranges):
            if sum(v * v for v in p) != q * q:
                continue
            if sum((t - v) ** 2 for t, v in zip(centers, p)) < c2:
                out.append(RationalApproximate.make(p, q))
    return out


def _product(ranges):
    if not ranges:
        yield ()
        return
    for v in ranges[0]:
        for rest in _product(ranges[1:]):
            yield (v,) + rest


def enumerate_near(alpha, c, q_lo: int, q_hi: int, *, threads: int = 1) -> list[RationalApproximate]:
    """Rational approximates p/q with q_lo <= q <= q_hi and ||alpha - p/q|| < c/q.

    ``alpha`` given as Fractions (with ||alpha|| = 1 exactly) selects the
    exact-rational mode; otherwise alpha is a float unit vector.
    """
    if q_hi >= q_lo:
        _check_height(q_hi)
    if all(isinstance(v, Fraction) for v in alpha):
        return _exact_near(alpha, c, q_lo, q_hi)
    return scan_near(alpha, float(c), q_lo, q_hi, threads=threads).approximates()


# --------------------------------------------------------------------------
# transformed lattices


@dataclass
class LatticePoints:
    """Points x = g v of a lattice together with their Lambda_0 preimages v."""

    v: np.ndarray  # int64, shape (N, n+2)
    x: np.ndarray  # float64 images (equal to v for Lambda_0)
    exact: bool

    def __len__(self) -> int:
        return int(self.v.shape[0])

    def primitive(self) -> np.ndarray:
        return primitive_mask(self.v[:, -1], self.v[:, :-1])

    def select(self, mask: np.ndarray) -> "LatticePoints":
        return LatticePoints(self.v[mask], self.x[mask], self.exact)

    def cone_vectors(self) -> list[ConeVector]:
        if self.exact:
            return [ConeVector(row, check=False) for row in self.v.tolist()]
        return [ConeVector(row, check=False) for row in self.x]


def _as_points(q: np.ndarray, P: np.ndarray, lattice: LatticeDescriptor) -> LatticePoints:
    v = np.concatenate([P, q[:, None]], axis=1).astype(np.int64)
    if lattice.is_standard:
        return LatticePoints(v, v.astype(float), True)
    return LatticePoints(v, v.astype(float) @ lattice.matrix.T, False)


def lattice_points_below(lattice: LatticeDescriptor, height: float) -> LatticePoints:
    """Superset of the lattice points with x_{n+2} <= height."""
    if height < 1 / 2:
        return _as_points(np.zeros(0, np.int64), np.zeros((0, lattice.n + 1), np.int64), lattice)
    if lattice.is_standard:
        hv = math.floor(height)
    else:
        # v_{n+2} = |v|/sqrt2 <= |g^-1| |x|/sqrt2 = |g^-1| x_{n+2}
        hv = math.floor(lattice.transform.inverse().op_norm() * height * (1 + 1e-12))
    if hv < 1:
        return _as_points(np.zeros(0, np.int64), np.zeros((0, lattice.n + 1), np.int64), lattice)
    _check_height(hv)
    q, P = all_points_array(hv, lattice.n)
    return _as_points(q, P, lattice)


def tube_points(lattice: LatticeDescriptor, alpha, radius: float, h_lo: float, h_hi: float) -> LatticePoints:
    """Superset of lattice points x with ||x_bar - x_{n+2} alpha|| < radius and h_lo <= x_{n+2} <= h_hi.

    For g Lambda_0 the preimages v = g^{-1} x lie within (1 + sqrt2)|g^{-1}| radius
    of the ray through g^{-1}(alpha, 1), which is again a localized scan.
    """
    a = normalize_alpha(alpha)
    if h_hi < max(h_lo, 0.5):
        return _as_points(np.zeros(0, np.int64), np.zeros((0, a.shape[0]), np.int64), lattice)
    if lattice.is_standard:
        lo, hi = max(1, math.ceil(h_lo)), math.floor(h_hi)
        s = scan_near(a, radius, lo, hi, keep=radius)
        return _as_points(s.q, s.P, lattice)
    ginv = lattice.transform.inverse()
    w = ginv.matrix @ np.append(a, 1.0)
    h = w[-1]
    beta = w[:-1] / h
    beta = beta / np.linalg.norm(beta)
    r2 = ginv.op_norm() * radius
    lo = max(1, math.floor(h * h_lo - r2) - 1)
    hi = math.ceil(h * h_hi + r2) + 1
    s = scan_near(beta, (1 + math.sqrt(2)) * r2 * (1 + 1e-9), lo, hi, keep=(1 + math.sqrt(2)) * r2 * (1 + 1e-9))
    return _as_points(s.q, s.P, lattice)


def enumerate_in_region(lattice: LatticeDescriptor, region: Callable[[ConeVector], bool], support_bound: float) -> list[ConeVector]:
    """All points x of the lattice with region(x) true; region must vanish above height support_bound."""
    pts = lattice_points_below(lattice, support_bound)
    return [x for x in pts.cone_vectors() if region(x)]


# --------------------------------------------------------------------------
# dump format: q,p_1,...,p_{n+1},primitive


def write_points(points: Iterable[RationalApproximate], fh) -> None:
    for a in points:
        fh.write(",".join([str(a.q)] + [str(v) for v in a.p] + ["1" if a.primitive else "0"]) + "\n")


def read_points(fh) -> list[RationalApproximate]:
    out = []
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        vals = [int(v) for v in line.split(",")]
        out.append(RationalApproximate(tuple(vals[1:-1]), vals[0], bool(vals[-1])))
    return out


def dumps_points(points: Iterable[RationalApproximate]) -> str:
    buf = io.StringIO()
    write_points(points, buf)
    return buf.getvalue()
