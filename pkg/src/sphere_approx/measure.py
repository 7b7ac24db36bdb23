"""The invariant measure on the light cone and volumes of the counting regions.

Chart: x = (x_tilde, s, h) with h = ||(x_tilde, s)||; the raw measure has
density 1/h in the coordinates (x_tilde, s). In the coordinates (x_tilde, u)
with u = [x] = h + s it becomes dx_tilde du / u, which gives the closed form
|F_{T,c,A}| = kappa * omega_n * c^n * T * vol(A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .cone import GroupElement, ValidationError, check_n
from .counting import DirectionSet, Window, count_table
from .points import LatticeDescriptor

CHUNK = 1 << 18


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConeMeasureConfig:
    normalization: float = 1.0
    mc_samples: int = 10**6
    rng_seed: int = 0

    def __post_init__(self):
        if not self.normalization > 0:
            raise ValueError("normalization must be positive")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be at least 1000")

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.rng_seed, stream])


@dataclass(frozen=True)
class VolumeResult:
    value: float
    stderr: float
    method: str  # closed_form | monte_carlo | quadrature

    def agrees(self, other: "VolumeResult", k: float = 3.0) -> bool:
        return abs(self.value - other.value) <= k * math.hypot(self.stderr, other.stderr)


def ball_volume(n: int, c: float = 1.0) -> float:
    """omega_n c^n, the volume of the n-ball of radius c."""
    return math.pi ** (n / 2) / gamma(n / 2 + 1) * c**n


def _dim(A: DirectionSet | None, n: int | None) -> int:
    d = A.dim if A is not None else None
    if n is None:
        n = d if d is not None else 1
    if d is not None and d != n:
        raise ValueError("direction set dimension differs from n")
    return check_n(n)


def _vol_A(A: DirectionSet | None) -> float:
    return 1.0 if A is None else A.measure


def _uniform_ball(rng: np.random.Generator, m: int, n: int, c: float) -> np.ndarray:
    z = rng.standard_normal((m, n))
    z /= np.linalg.norm(z, axis=1)[:, None]
    rad = c * rng.random(m) ** (1.0 / n)
    return z * rad[:, None]


def _dir_ok(xt: np.ndarray, A: DirectionSet | None) -> np.ndarray:
    if A is None:
        return np.ones(xt.shape[0], bool)
    nrm = np.linalg.norm(xt, axis=1)
    ok = nrm > 0
    out = np.zeros(xt.shape[0], bool)
    out[ok] = A.contains(xt[ok] / nrm[ok, None])
    return out


def _mean_se(chunks: list[np.ndarray], total: int) -> tuple[float, float]:
    s1 = sum(float(np.sum(v)) for v in chunks)
    s2 = sum(float(np.sum(v * v)) for v in chunks)
    mean = s1 / total
    var = max(s2 / total - mean * mean, 0.0)
    return mean, math.sqrt(var / total)


# --------------------------------------------------------------------------
# F


def volume_F(w: Window, A: DirectionSet | None = None, cfg: ConeMeasureConfig | None = None, *, n: int | None = None, method: str = "closed_form") -> VolumeResult:
    """|F_{T,c,A}| under kappa times the raw density.

    ``method="monte_carlo"`` is an independent oracle: importance sampling in
    the raw chart (x_tilde, x_{n+1}) with weight 1/x_{n+2}, no change of
    variables involved.
    """
    cfg = cfg or ConeMeasureConfig()
    n = _dim(A, n)
    if method == "closed_form":
        return VolumeResult(cfg.normalization * ball_volume(n, w.c) * w.T * _vol_A(A), 0.0, "closed_form")
    if method == "monte_carlo":
        v, se = _box_oracle_F(w, A, cfg, n)
        return VolumeResult(cfg.normalization * v, cfg.normalization * se, "monte_carlo")
    raise ValueError(f"unknown method {method!r}")


def _box_oracle_F(w: Window, A, cfg: ConeMeasureConfig, n: int) -> tuple[float, float]:
    """x_tilde uniform on [-c, c]^n, x_{n+1} from a uniform / log-uniform mixture,
    weight (1/x_{n+2}) / proposal density."""
    c = w.c
    eT = w.exp_T
    # rho < c and 1 <= h + s < e^T force s in [(1 - c^2)/2, e^T/2)
    s_lo, s_hi = (1 - c * c) / 2, eT / 2
    s_mid = min(max(1.0, s_lo + 1.0), s_hi)
    box_x = (2 * c) ** n
    log_part = s_hi > s_mid
    rng = cfg.rng(1)
    vals = []
    left = cfg.mc_samples
    while left > 0:
        m = min(CHUNK, left)
        left -= m
        xt = rng.uniform(-c, c, size=(m, n))
        if log_part:
            pick = rng.random(m) < 0.5
            s = np.where(pick, rng.uniform(s_lo, s_mid, size=m), np.exp(rng.uniform(math.log(s_mid), math.log(s_hi), size=m)))
            dens = 0.5 * np.where(s < s_mid, 1.0 / (s_mid - s_lo), 0.0) + 0.5 * np.where(s >= s_mid, 1.0 / (s * math.log(s_hi / s_mid)), 0.0)
        else:
            s = rng.uniform(s_lo, s_hi, size=m)
            dens = np.full(m, 1.0 / (s_hi - s_lo))
        rho2 = np.sum(xt * xt, axis=1)
        h = np.sqrt(rho2 + s * s)
        u = h + s
        inside = (rho2 < c * c) & (u >= 1) & (u < eT) & _dir_ok(xt, A)
        vals.append(np.where(inside, box_x / (h * dens), 0.0))
    return _mean_se(vals, cfg.mc_samples)


def sample_F(w: Window, m: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Exact sampler of the raw measure restricted to F_{T,c}: x_tilde uniform in the
    c-ball and u = [x] log-uniform on [1, e^T). Returns cone points, shape (m, n+2)."""
    xt = _uniform_ball(rng, m, n, w.c)
    u = np.exp(rng.uniform(0.0, w.T, size=m))
    return cone_from_chart(xt, u)


def cone_from_chart(xt: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Cone point with given x_tilde and bracket u: x_{n+2} - x_{n+1} = |x_tilde|^2 / u."""
    rho2 = np.sum(xt * xt, axis=1)
    gap = rho2 / u
    out = np.empty((xt.shape[0], xt.shape[1] + 2))
    out[:, :-2] = xt
    out[:, -2] = (u - gap) / 2
    out[:, -1] = (u + gap) / 2
    return out


# --------------------------------------------------------------------------
# E


def _log_len(lo: float, hi: float) -> float:
    return math.log(hi / lo) if hi > lo else 0.0


def _E_log_length(rho: float, c: float, cosh_T: float) -> float:
    """Log-measure of {u : (rho, u) in E_{T,c}}.

    With gap = rho^2/u and h = (u + gap)/2 the conditions read
    u > rho^2 / sqrt(c^2 - rho^2),  u + rho^2/u >= 2,  u + rho^2/u < 2 cosh T.
    """
    if rho >= c or rho >= cosh_T:
        # u + rho^2/u >= 2 rho, so rho >= cosh T leaves nothing
        return 0.0
    r2 = rho * rho
    if rho == 0.0:
        return math.inf
    a = r2 / math.sqrt(c * c - r2)
    vp = cosh_T + math.sqrt(cosh_T * cosh_T - r2)
    vm = r2 / vp
    lo, hi = max(a, vm), vp
    total = _log_len(lo, hi)
    if rho < 1:
        up = 1 + math.sqrt(1 - r2)
        um = r2 / up
        total -= _log_len(max(lo, um), min(hi, up))
    return max(total, 0.0)


def volume_E(w: Window, A: DirectionSet | None = None, cfg: ConeMeasureConfig | None = None, *, n: int | None = None, method: str = "quadrature") -> VolumeResult:
    """|E_{T,c,A}| by 1-D quadrature in rho = |x_tilde| or by Monte Carlo.

    E_{T,c} is rotation invariant in x_tilde, so vol(A) factors out exactly.
    """
    cfg = cfg or ConeMeasureConfig()
    n = _dim(A, n)
    k = cfg.normalization * _vol_A(A)
    if w.cosh_T <= 1.0:
        return VolumeResult(0.0, 0.0, method)
    if method == "quadrature":
        v, err = _quad_E(w, n)
        return VolumeResult(k * v, k * err, "quadrature")
    if method == "monte_carlo":
        v, se = _mc_E(w, A, cfg, n)
        return VolumeResult(cfg.normalization * v, cfg.normalization * se, "monte_carlo")
    raise ValueError(f"unknown method {method!r}")


def _quad_E(w: Window, n: int) -> tuple[float, float]:
    c, ch = w.c, w.cosh_T
    sphere = n * ball_volume(n)

    def f(rho):
        if rho <= 0:
            return 0.0
        return sphere * rho ** (n - 1) * _E_log_length(rho, c, ch)

    # kinks: rho = 1, and where a = rho^2/sqrt(c^2-rho^2) meets u_-, u_+, v_+
    pts = {1.0}
    for target in (1.0, 2.0, 2 * ch):
        # a(rho) = target is solved by rho^2 = target (sqrt(target^2 + 4 c^2) - target) / 2
        r2 = target * (math.sqrt(target * target + 4 * c * c) - target) / 2
        pts.add(math.sqrt(r2))
    pts = sorted(p for p in pts if 0 < p < c)
    edges = [0.0] + pts + [c]
    total = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
        total += v
        err += e
    return total, err


def _mc_E(w: Window, A, cfg: ConeMeasureConfig, n: int) -> tuple[float, float]:
    """x_tilde uniform in the c-ball, ln u uniform between a lower bound and ln(2 cosh T).

    2 cosh T bounds [x] on E (it is < e^{T + r_0}, the enclosing F-region);
    the lower bound is the smallest u allowed by the c- and height constraints
    (u may be far below 1: h >= 1 is also met by points with x_{n+1} << 0).
    Membership is then tested directly on the reconstructed cone point.
    """
    c, ch = w.c, w.cosh_T
    ball = ball_volume(n, c)
    log_hi = math.log(2 * ch)
    rng = cfg.rng(2)
    vals = []
    left = cfg.mc_samples
    while left > 0:
        m = min(CHUNK, left)
        left -= m
        xt = _uniform_ball(rng, m, n, c)
        rho2 = np.sum(xt * xt, axis=1)
        rho2 = np.maximum(rho2, 1e-300)
        lo_c = rho2 / np.sqrt(c * c - rho2)
        # h < cosh T forces u > rho^2 / (cosh T + sqrt(cosh^2 T - rho^2))
        disc = ch * ch - rho2
        lo_h = rho2 / (ch + np.sqrt(np.clip(disc, 0, None)))
        log_lo = np.log(np.maximum(lo_c, lo_h))
        span = np.where(disc > 0, np.maximum(log_hi - log_lo, 0.0), 0.0)
        u = np.exp(log_lo + span * rng.random(m))
        x = cone_from_chart(xt, u)
        h, s = x[:, -1], x[:, -2]
        gap = rho2 / u
        inside = (2 * h * gap < c * c) & (h >= 1) & (h < ch) & _dir_ok(xt, A)
        vals.append(np.where(inside, ball * span, 0.0))
    return _mean_se(vals, cfg.mc_samples)


def eta(c: float, cfg: ConeMeasureConfig | None = None, *, n: int = 1) -> float:
    """eta(c) = |F_{1,c}| = kappa omega_n c^n."""
    if not c > 0:
        raise ValueError("c must be positive")
    return volume_F(Window(1.0, c), None, cfg, n=n).value


# --------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Calibration:
    kappa: float
    slopes: np.ndarray
    total_count: int


def calibrate(samples: int, w: Window, cfg: ConeMeasureConfig | None = None, *, n: int = 2, lattice: LatticeDescriptor | None = None) -> Calibration:
    """kappa_hat = mean_alpha(N_{T,c}(alpha)/T) / (omega_n c^n) over `samples` uniform alpha."""
    cfg = cfg or ConeMeasureConfig()
    if samples < 5:
        raise ValueError("need at least 5 samples")
    rng = cfg.rng(3)
    slopes = np.empty(samples)
    total = 0
    for i in range(samples):
        a = rng.standard_normal(n + 1)
        a /= np.linalg.norm(a)
        cnt = int(count_table(a, [w.c], [w.T], lattice, cross_check=False).total[0, 0])
        total += cnt
        slopes[i] = cnt / w.T
    if total == 0:
        raise CalibrationError("all counts are zero; enlarge T or c")
    return Calibration(float(slopes.mean()) / ball_volume(n, w.c), slopes, total)


def calibrate_kappa(samples: int, w: Window, cfg: ConeMeasureConfig | None = None, *, n: int = 2) -> float:
    return calibrate(samples, w, cfg, n=n).kappa


# --------------------------------------------------------------------------
# invariance


@dataclass(frozen=True)
class ChartRegion:
    """Bounded region of the cone: a box in the chart (x_tilde, x_{n+1}) cut by an optional predicate on cone points."""

    lo: tuple
    hi: tuple
    predicate: object = None

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be vectors of equal length")
        check_n(lo.shape[0] - 1)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("region must be bounded")
        if np.any(hi <= lo):
            raise ValueError("empty box")

    @property
    def n(self) -> int:
        return len(self.lo) - 1

    def contains(self, X: np.ndarray) -> np.ndarray:
        y = X[:, :-1]
        ok = np.all((y >= np.asarray(self.lo)) & (y <= np.asarray(self.hi)), axis=1)
        if self.predicate is not None:
            ok &= self.predicate(X)
        return ok

    @classmethod
    def F_shell(cls, r: float, c: float, n: int, A: DirectionSet | None = None) -> "ChartRegion":
        """F_{r,c,A} as a chart region."""
        eR = math.exp(r)

        def pred(X):
            rho2 = np.sum(X[:, :-2] ** 2, axis=1)
            u = X[:, -1] + X[:, -2]
            return (rho2 < c * c) & (u >= 1) & (u < eR) & _dir_ok(X[:, :-2], A)

        lo = (-c,) * n + ((1 - c * c) / 2,)
        hi = (c,) * n + (eR / 2,)
        return cls(lo, hi, pred)

    def height_range(self) -> tuple[float, float]:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        near = np.clip(0.0, lo, hi)
        far = np.maximum(np.abs(lo), np.abs(hi))
        return float(np.linalg.norm(near)), float(np.linalg.norm(far))


def _image_box(g: GroupElement, region: ChartRegion) -> tuple[np.ndarray, np.ndarray]:
    """Interval-arithmetic chart box containing g(region)."""
    h_lo, h_hi = region.height_range()
    lo = np.append(np.asarray(region.lo, float), h_lo)
    hi = np.append(np.asarray(region.hi, float), h_hi)
    M = g.matrix[:-1]
    pos, neg = np.clip(M, 0, None), np.clip(M, None, 0)
    return pos @ lo + neg @ hi, pos @ hi + neg @ lo


def _mc_mass(lo: np.ndarray, hi: np.ndarray, accept, m: int, rng: np.random.Generator) -> tuple[float, float]:
    vol = float(np.prod(hi - lo))
    vals = []
    left = m
    while left > 0:
        k = min(CHUNK, left)
        left -= k
        y = lo + (hi - lo) * rng.random((k, lo.shape[0]))
        h = np.linalg.norm(y, axis=1)
        X = np.concatenate([y, h[:, None]], axis=1)
        vals.append(np.where(accept(X), vol / np.maximum(h, 1e-300), 0.0))
    return _mean_se(vals, m)


@dataclass(frozen=True)
class InvarianceResult:
    passed: bool
    mass: VolumeResult
    image_mass: VolumeResult


def invariance_test(g: GroupElement, region: ChartRegion, cfg: ConeMeasureConfig | None = None) -> InvarianceResult:
    """Monte Carlo lambda-mass of region and of g(region); pass iff within 3 combined SE.

    Both estimates use the same random stream, so g = identity gives equal numbers.
    """
    cfg = cfg or ConeMeasureConfig()
    if g.n != region.n:
        raise ValueError("dimension mismatch")
    lo, hi = np.asarray(region.lo, float), np.asarray(region.hi, float)
    a, se_a = _mc_mass(lo, hi, region.contains, cfg.mc_samples, cfg.rng(4))
    ilo, ihi = _image_box(g, region)
    ginv = g.inverse().matrix

    def pulled_back(X):
        return region.contains(X @ ginv.T)

    b, se_b = _mc_mass(ilo, ihi, pulled_back, cfg.mc_samples, cfg.rng(4))
    k = cfg.normalization
    ra = VolumeResult(k * a, k * se_a, "monte_carlo")
    rb = VolumeResult(k * b, k * se_b, "monte_carlo")
    return InvarianceResult(a == b or ra.agrees(rb), ra, rb)
