"""Minkowski form, the positive light cone, and the groups G = SO(n+1,1)°, K, A, N.

Coordinates are x = (x_1, ..., x_n, x_{n+1}, x_{n+2}); the form is
Q(x) = x_1^2 + ... + x_{n+1}^2 - x_{n+2}^2 with Gram matrix J = diag(1,...,1,-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Integral

import numpy as np

TOL = 1e-9
DIMENSIONS = (1, 2, 3)


class DimensionError(ValueError):
    """Vector or matrix of the wrong size for the ambient dimension n."""


class ValidationError(ValueError):
    """Input fails a group-membership or cone-membership check."""


def check_n(n: int) -> int:
    if n not in DIMENSIONS:
        raise DimensionError(f"n must be one of {DIMENSIONS}, got {n}")
    return n


def gram(n: int) -> np.ndarray:
    J = np.eye(n + 2)
    J[-1, -1] = -1.0
    return J


def _is_integral(arr: np.ndarray) -> bool:
    if arr.dtype.kind in "iu":
        return True
    if arr.dtype == object:
        return all(isinstance(v, Integral) for v in arr.flat)
    return False


def eval_Q(x) -> float:
    """Q(x) = sum_{i<=n+1} x_i^2 - x_{n+2}^2 (exact for integer input)."""
    if isinstance(x, ConeVector):
        x = x.coords
    if isinstance(x, np.ndarray) and x.dtype.kind == "f":
        v = x
    else:
        v = list(x)
        if all(isinstance(t, Integral) for t in v):
            if len(v) - 2 not in DIMENSIONS:
                raise DimensionError(f"expected length n+2 with n in {DIMENSIONS}, got {len(v)}")
            return sum(int(t) * int(t) for t in v[:-1]) - int(v[-1]) ** 2
        v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] - 2 not in DIMENSIONS:
        raise DimensionError(f"expected length n+2 with n in {DIMENSIONS}, got shape {v.shape}")
    return float(np.dot(v[:-1], v[:-1]) - v[-1] * v[-1])


@dataclass(frozen=True)
class ConeVector:
    """A point on the positive light cone.

    Integer coordinates are kept as Python ints (object array) so the cone
    equation is checked exactly; real coordinates are float64 and checked to
    within ``TOL`` relative to the height.
    """

    coords: np.ndarray
    integer_flag: bool = field(default=False)

    def __init__(self, coords, check: bool = True):
        arr = np.asarray(coords)
        integral = _is_integral(arr)
        if integral:
            arr = np.array([int(v) for v in arr.flat], dtype=object)
        else:
            arr = np.asarray(arr, dtype=float)
        if arr.ndim != 1 or arr.shape[0] - 2 not in DIMENSIONS:
            raise DimensionError(f"cone vector must have length n+2, n in {DIMENSIONS}")
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "integer_flag", integral)
        if check:
            self._validate()

    @property
    def n(self) -> int:
        return self.coords.shape[0] - 2

    @property
    def height(self):
        return self.coords[-1]

    def _validate(self) -> None:
        x = self.coords
        h = x[-1]
        if self.integer_flag:
            if eval_Q(x) != 0:
                raise ValidationError(f"integer point {tuple(x)} is not on the cone")
            if h < 0:
                raise ValidationError("point lies on the negative cone")
            return
        scale = max(1.0, float(h) * float(h))
        if abs(eval_Q(x)) > TOL * scale:
            raise ValidationError(f"Q(x) = {eval_Q(x):.3e} is not zero")
        if h < -TOL:
            raise ValidationError("point lies on the negative cone")
        if np.any(np.abs(x[:-1].astype(float)) > float(h) * (1 + TOL) + TOL):
            raise ValidationError("coordinate exceeds the height")

    def as_float(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConeVector):
            return NotImplemented
        return self.coords.shape == other.coords.shape and bool(np.all(self.coords == other.coords))

    def __hash__(self) -> int:
        return hash(tuple(self.coords.tolist()))


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m))))


@dataclass(frozen=True, eq=False)
class GroupElement:
    """An element of SO(n+1,1)° stored as an (n+2)x(n+2) float matrix."""

    matrix: np.ndarray

    def __init__(self, matrix, check: bool = True):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] - 2 not in DIMENSIONS:
            raise DimensionError(f"group element must be (n+2)x(n+2) with n in {DIMENSIONS}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if check:
            self.validate()

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 2

    def validate(self) -> None:
        g = self.matrix
        J = gram(self.n)
        # entries grow like e^|t|, so the residual is measured against |g|^2
        s = _scale(g) ** 2
        resid = np.max(np.abs(g.T @ J @ g - J))
        if resid > TOL * s:
            raise ValidationError(f"g^T J g != J (residual {resid:.3e})")
        if g[-1, -1] <= 0:
            raise ValidationError("g does not preserve the positive cone")
        # with g^T J g = J, det g = +-1; by KAK its sign is that of the spatial
        # block (|det| = cosh t >= 1), which avoids the cancellation in det g itself
        if np.linalg.slogdet(g[:-1, :-1])[0] <= 0:
            raise ValidationError("det(g) != 1")

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            return GroupElement(self.matrix @ other.matrix, check=False)
        return apply(self, other)

    def inverse(self) -> "GroupElement":
        # g^{-1} = J g^T J for g in O(Q)
        J = gram(self.n)
        return GroupElement(J @ self.matrix.T @ J, check=False)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.n + 2)))

    def op_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash(self.matrix.tobytes())


def identity(n: int) -> GroupElement:
    check_n(n)
    return GroupElement(np.eye(n + 2), check=False)


def make_g_t(t: float, n: int) -> GroupElement:
    """Geodesic flow element g_t; acts as a hyperbolic rotation on (x_{n+1}, x_{n+2})."""
    check_n(n)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    m = np.eye(n + 2)
    ch, sh = math.cosh(t), math.sinh(t)
    m[n, n] = ch
    m[n, n + 1] = -sh
    m[n + 1, n] = -sh
    m[n + 1, n + 1] = ch
    return GroupElement(m, check=False)


def u_y_entries(y) -> list:
    """Entries of the horospherical element u_y as nested lists.

    Works over any field type supporting +, -, * (floats, Fractions, sympy);
    used both for the float matrix and for exact-arithmetic checks.
    """
    y = list(y)
    n = len(y)
    half = sum(v * v for v in y) / 2
    rows = []
    for i in range(n):
        row = [1 if i == j else 0 for j in range(n)]
        row += [-y[i], y[i]]
        rows.append(row)
    rows.append(list(y) + [1 - half, half])
    rows.append(list(y) + [-half, 1 + half])
    return rows


def make_u_y(y) -> GroupElement:
    """Element u_y of the contracting horospherical subgroup N."""
    y = np.asarray(y, dtype=float).ravel()
    check_n(y.shape[0])
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return GroupElement(np.array(u_y_entries(y.tolist()), dtype=float), check=False)


def is_rotation(R, tol: float = TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        return False
    if np.max(np.abs(R.T @ R - np.eye(R.shape[0]))) > tol:
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def embed_K(R) -> GroupElement:
    """Block-diagonal element diag(R, 1) of K for R in SO(n+1)."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionError("rotation must be square")
    check_n(R.shape[0] - 1)
    if not is_rotation(R):
        raise ValidationError("R is not in SO(n+1)")
    m = np.eye(R.shape[0] + 1)
    m[:-1, :-1] = R
    return GroupElement(m, check=False)


def bracket(x) -> float:
    """[x] = x_{n+2} + x_{n+1}."""
    c = x.coords if isinstance(x, ConeVector) else x
    return c[-1] + c[-2]


def apply(g: GroupElement, x) -> np.ndarray:
    """Matrix-vector product g x (float)."""
    v = x.as_float() if isinstance(x, ConeVector) else np.asarray(x, dtype=float)
    if v.shape[-1] != g.matrix.shape[0]:
        raise DimensionError(f"vector of length {v.shape[-1]} for a {g.matrix.shape[0]}-dim group element")
    return v @ g.matrix.T


@dataclass(frozen=True)
class IwasawaFactors:
    y: np.ndarray
    t: float
    k: GroupElement

    def rotation(self) -> np.ndarray:
        return self.k.matrix[:-1, :-1].copy()

    def reconstruct(self) -> GroupElement:
        n = self.k.n
        return GroupElement(make_u_y(self.y).matrix @ make_g_t(self.t, n).matrix @ self.k.matrix, check=False)


def iwasawa_decompose(g: GroupElement) -> IwasawaFactors:
    """Write g = u_y g_t k using the image of u_{n+2}.

    With w = g u_{n+2} one has w_{n+2} - w_{n+1} = e^t and (w_1..w_n) = e^t y.
    """
    n = g.n
    w = g.matrix[:, -1]
    gap = w[-1] - w[-2]
    if not gap > 0:
        raise ValidationError("w_{n+2} - w_{n+1} <= 0: g is not in the identity component")
    t = math.log(gap)
    y = w[:n] / gap
    km = make_g_t(-t, n).matrix @ make_u_y(-y).matrix @ g.matrix
    s = _scale(g.matrix) ** 2
    off = max(np.max(np.abs(km[-1, :-1])), np.max(np.abs(km[:-1, -1])), abs(km[-1, -1] - 1.0))
    if off > TOL * s:
        raise ValidationError(f"K-factor is not block diagonal (off-block {off:.3e})")
    km[-1, :-1] = 0.0
    km[:-1, -1] = 0.0
    km[-1, -1] = 1.0
    return IwasawaFactors(y=y, t=t, k=GroupElement(km, check=False))


def random_rotation(n_plus_1: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(m) via QR of a Gaussian matrix."""
    Z = rng.standard_normal((n_plus_1, n_plus_1))
    Qm, Rm = np.linalg.qr(Z)
    Qm = Qm * np.sign(np.diag(Rm))
    if np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm


def random_group_element(n: int, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
    """u_y g_t k with y, t drawn from [-scale, scale] and k Haar-random."""
    y = rng.uniform(-scale, scale, size=n)
    t = float(rng.uniform(-scale, scale))
    k = embed_K(random_rotation(n + 1, rng))
    return make_u_y(y) @ make_g_t(t, n) @ k
