"""Batch experiment driver.

Exit codes: 0 all checks pass, 1 invariant violation, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from . import __version__
from .cone import DimensionError, ValidationError, embed_K, make_g_t, make_u_y, random_rotation
from .counting import (
    ConsistencyError,
    DirectionSet,
    SandwichConstants,
    Window,
    count_table,
    directional_counts,
    parse_direction_set,
    quadrants,
    sandwich_masks,
)
from .dynamics import OrbitConfig, birkhoff_slope, orbit_chain_check
from .measure import ConeMeasureConfig, ball_volume, calibrate, volume_E, volume_F
from .points import LatticeDescriptor, RangeError

STREAMS = {"targets": 1, "mc": 2, "lattices": 3}

COLUMNS = {
    "count": lambda n: ["n", "c", "T"] + [f"alpha_{i + 1}" for i in range(n + 1)] + ["total", "primitive_total", "polar", "boundary_hits", "elapsed_ms"],
    "sweep": lambda n: ["row", "n", "c", "target", "slope", "intercept", "r2", "slope_primitive", "rel_sd", "flag"],
    "spiral": lambda n: ["n", "c", "T", "A_kind", "count", "nonpolar", "fraction", "vol_A", "polar"],
    "volume": lambda n: ["region", "n", "c", "T", "A_kind", "value", "stderr", "method", "seed"],
    "orbit": lambda n: ["n", "c", "r", "T", "lattice_desc", "A_kind", "count_inner", "integral", "count_outer", "slope"],
    "calibrate": lambda n: ["n", "c", "T", "samples", "kappa_hat", "mean_slope", "total_count", "delta_vs_first", "status"],
    "selftest": lambda n: ["check", "status", "detail"],
}


class ConfigError(ValueError):
    pass


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, STREAMS[name]])


@dataclass
class ExperimentConfig:
    n: int = 1
    c_list: tuple = (1.0,)
    T_grid: tuple = (5.0,)
    alpha_mode: str = "random"  # random | explicit
    alpha_count: int = 10
    alphas: tuple = ()
    lattice: str = "standard"  # standard | random_rotation | g_t:<s> | u_y:<y1,...>
    direction_sets: tuple = ()
    output_path: str = "-"
    kappa: float | None = None
    seed: int = 0
    threads: int = 1
    r: float = 1.0
    samples: int = 20
    mc_samples: int = 10**6
    timing: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.n not in (1, 2, 3):
            raise ConfigError(f"n must be 1, 2 or 3, got {self.n}")
        if not self.c_list or any(not c > 0 for c in self.c_list):
            raise ConfigError("c_list must be a nonempty list of positive reals")
        if any(not t > 0 for t in self.T_grid) or any(b <= a for a, b in zip(self.T_grid, self.T_grid[1:])):
            raise ConfigError("T_grid must be increasing positive reals")
        if max(self.T_grid, default=0) > 700:
            raise ConfigError("T must be <= 700")
        if self.alpha_mode == "random":
            if self.alpha_count < 1:
                raise ConfigError("random alpha mode needs count >= 1")
        elif self.alpha_mode == "explicit":
            if not self.alphas:
                raise ConfigError("explicit alpha mode needs at least one vector")
            for a in self.alphas:
                if len(a) != self.n + 1:
                    raise ConfigError(f"alpha {a} has length {len(a)}, expected {self.n + 1}")
                if abs(math.sqrt(sum(v * v for v in a)) - 1) > 1e-12:
                    raise ConfigError(f"alpha {a} is not a unit vector")
        else:
            raise ConfigError(f"unknown alpha mode {self.alpha_mode!r}")
        for A in self.direction_sets:
            if A.dim not in (None, self.n):
                raise ConfigError(f"direction set {A.describe()} does not live on S^{self.n - 1}")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.r > 0 or self.threads < 1 or self.samples < 1 or self.mc_samples < 1000:
            raise ConfigError("r > 0, threads >= 1, samples >= 1 and mc_samples >= 1000 required")
        self.lattice_descriptor()
        return self

    def canonical(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "output_path":  # where the rows go does not change them
                continue
            v = getattr(self, f.name)
            if f.name == "direction_sets":
                v = [A.describe() for A in v]
            lines.append(f"{f.name}={v!r}")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def targets(self) -> list[np.ndarray]:
        if self.alpha_mode == "explicit":
            return [np.asarray(a, float) / np.linalg.norm(a) for a in self.alphas]
        rng = substream(self.seed, "targets")
        out = []
        for _ in range(self.alpha_count):
            z = rng.standard_normal(self.n + 1)
            out.append(z / np.linalg.norm(z))
        return out

    def lattice_descriptor(self) -> LatticeDescriptor:
        spec = self.lattice.strip()
        try:
            if spec == "standard":
                return LatticeDescriptor(self.n)
            if spec == "random_rotation":
                R = random_rotation(self.n + 1, substream(self.seed, "lattices"))
                return LatticeDescriptor.of(embed_K(R))
            kind, _, arg = spec.partition(":")
            if kind == "g_t":
                return LatticeDescriptor.of(make_g_t(float(arg), self.n))
            if kind == "u_y":
                return LatticeDescriptor.of(make_u_y([float(v) for v in arg.split(",")]))
        except (ValueError, DimensionError) as e:
            raise ConfigError(f"bad lattice {spec!r}: {e}") from e
        raise ConfigError(f"unknown lattice {spec!r}")


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.split(","))


def _parse_value(key: str, val: str, cfg: ExperimentConfig) -> dict:
    val = val.strip()
    if key in ("n", "alpha_count", "seed", "threads", "samples", "mc_samples"):
        return {key: int(float(val)) if key != "seed" else int(val)}
    if key in ("c", "c_list"):
        return {"c_list": _floats(val)}
    if key in ("T", "T_grid"):
        return {"T_grid": _floats(val)}
    if key in ("r",):
        return {"r": float(val)}
    if key == "kappa":
        return {"kappa": None if val in ("", "none") else float(val)}
    if key == "timing":
        return {"timing": val.lower() in ("1", "true", "yes")}
    if key in ("out", "output_path"):
        return {"output_path": val}
    if key == "lattice":
        return {"lattice": val}
    if key == "alpha":
        # random:<count>  or  explicit:a,b,c;d,e,f
        mode, _, rest = val.partition(":")
        if mode == "random":
            return {"alpha_mode": "random", "alpha_count": int(rest) if rest else cfg.alpha_count}
        if mode == "explicit":
            return {"alpha_mode": "explicit", "alphas": tuple(_floats(v) for v in rest.split(";") if v.strip())}
        raise ConfigError(f"bad alpha mode {val!r}")
    if key in ("A", "direction_sets"):
        if val == "quadrants":
            return {"direction_sets": tuple(quadrants())}
        return {"direction_sets": tuple(parse_direction_set(t) for t in val.split())}
    raise ConfigError(f"unknown config key {key!r}")


def load_config_text(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, val = line.split("=", 1)
        try:
            cfg = replace(cfg, **_parse_value(key.strip(), val, cfg))
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: {e}") from e
    return cfg


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from e
        cfg = load_config_text(text, cfg)
    over = {}
    try:
        if args.n is not None:
            over["n"] = args.n
        if args.c is not None:
            over["c_list"] = _floats(args.c)
        if args.T is not None:
            over["T_grid"] = _floats(args.T)
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["output_path"] = args.out
        if args.threads is not None:
            over["threads"] = args.threads
        if args.alpha is not None:
            over.update(_parse_value("alpha", args.alpha, cfg))
        if args.A is not None:
            over.update(_parse_value("A", args.A, cfg))
        if args.lattice is not None:
            over["lattice"] = args.lattice
        if args.r is not None:
            over["r"] = args.r
        if args.samples is not None:
            over["samples"] = args.samples
        if args.mc_samples is not None:
            over["mc_samples"] = args.mc_samples
        if args.timing:
            over["timing"] = True
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e
    cfg = replace(cfg, **over)
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg.validate()


# --------------------------------------------------------------------------
# output


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


class Report:
    def __init__(self, command: str, cfg: ExperimentConfig):
        self.command = command
        self.cfg = cfg
        self.columns = COLUMNS[command](cfg.n)
        self.rows: list[list[str]] = []
        self.violations = 0

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise AssertionError(f"{self.command}: row has {len(values)} fields, schema has {len(self.columns)}")
        self.rows.append([fmt(v) for v in values])

    def text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# sphere_approx {__version__}\n")
        buf.write(f"# command={self.command}\n")
        buf.write(f"# seed={self.cfg.seed}\n")
        buf.write(f"# config_hash={self.cfg.config_hash()}\n")
        # direction-set names contain commas, so fields are quoted where needed
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()


# --------------------------------------------------------------------------
# commands


def cmd_count(cfg: ExperimentConfig, rep: Report) -> None:
    lattice = cfg.lattice_descriptor()
    for a in cfg.targets():
        if not cfg.T_grid:
            continue
        t0 = time.perf_counter()
        tab = count_table(a, cfg.c_list, cfg.T_grid, lattice)
        ms = 1000 * (time.perf_counter() - t0) / tab.total.size if cfg.timing else 0
        for i, c in enumerate(cfg.c_list):
            for j, T in enumerate(cfg.T_grid):
                rep.add(cfg.n, c, T, *a.tolist(), tab.total[i, j], tab.primitive[i, j], tab.polar[i, j], tab.boundary_hits[i, j], ms)


def _fit(T: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    if T.shape[0] < 2 or np.ptp(T) == 0:
        return math.nan, math.nan, math.nan
    slope, intercept = np.polyfit(T, y, 1)
    resid = y - (slope * T + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - float(np.sum(resid**2)) / ss if ss > 0 else math.nan
    return float(slope), float(intercept), r2


def sweep_table(cfg: ExperimentConfig) -> dict:
    """Per-target slopes for every c; the core of cmd_sweep (also used by the acceptance suite)."""
    lattice = cfg.lattice_descriptor()
    T = np.asarray(cfg.T_grid, float)
    out = {c: [] for c in cfg.c_list}
    for idx, a in enumerate(cfg.targets()):
        tab = count_table(a, cfg.c_list, cfg.T_grid, lattice, cross_check=False)
        for i, c in enumerate(cfg.c_list):
            y = tab.total[i].astype(float)
            slope, intercept, r2 = _fit(T, y)
            sp = _fit(T, tab.primitive[i].astype(float))[0]
            out[c].append({"target": idx, "slope": slope, "intercept": intercept, "r2": r2, "slope_primitive": sp, "all_zero": not np.any(y)})
    return out


def cmd_sweep(cfg: ExperimentConfig, rep: Report) -> None:
    table = sweep_table(cfg)
    means = {}
    for c in cfg.c_list:
        rows = table[c]
        for row in rows:
            flag = "all_zero" if row["all_zero"] else ("slope_undefined" if math.isnan(row["slope"]) else "ok")
            rep.add("target", cfg.n, c, row["target"], row["slope"], row["intercept"], row["r2"], row["slope_primitive"], math.nan, flag)
        s = np.array([r["slope"] for r in rows])
        sp = np.array([r["slope_primitive"] for r in rows])
        r2 = np.array([r["r2"] for r in rows])
        mean = float(s.mean()) if s.size else math.nan
        means[c] = mean
        rel_sd = float(s.std(ddof=1) / mean) if s.size > 1 and mean else math.nan
        flag = "ok" if np.all(np.isfinite(s)) and mean > 0 else "flagged"
        rep.add("aggregate", cfg.n, c, "all", mean, math.nan, float(np.min(r2)) if r2.size else math.nan, float(sp.mean()) if sp.size else math.nan, rel_sd, flag)
    c0 = cfg.c_list[0]
    for c in cfg.c_list[1:]:
        ratio = means[c] / means[c0] if means[c0] else math.nan
        expected = (c / c0) ** cfg.n
        rep.add("ratio", cfg.n, c, f"c/{fmt(c0)}", ratio, math.nan, math.nan, math.nan, math.nan, f"expected_{fmt(expected)}")


def cmd_spiral(cfg: ExperimentConfig, rep: Report) -> None:
    sets = list(cfg.direction_sets) or (quadrants() if cfg.n == 2 else [DirectionSet.full()])
    lattice = cfg.lattice_descriptor()
    targets = cfg.targets()
    for c in cfg.c_list:
        for T in cfg.T_grid:
            counts = np.zeros(len(sets), np.int64)
            nonpolar = polar = 0
            for a in targets:
                cs, npol, pol = directional_counts(a, Window(T, c), sets, lattice)
                counts += cs
                nonpolar += npol
                polar += pol
            for A, k in zip(sets, counts):
                frac = k / nonpolar if nonpolar else math.nan
                rep.add(cfg.n, c, T, A.describe(), k, nonpolar, frac, A.measure, polar)


def cmd_volume(cfg: ExperimentConfig, rep: Report) -> None:
    mcfg = ConeMeasureConfig(cfg.kappa or 1.0, cfg.mc_samples, int(substream(cfg.seed, "mc").integers(2**63)))
    sets = list(cfg.direction_sets) or [None]
    for c in cfg.c_list:
        for T in cfg.T_grid:
            w = Window(T, c)
            for A in sets:
                kind = "full" if A is None else A.describe()
                for method in ("closed_form", "monte_carlo"):
                    v = volume_F(w, A, mcfg, n=cfg.n, method=method)
                    rep.add("F", cfg.n, c, T, kind, v.value, v.stderr, v.method, mcfg.rng_seed)
                for method in ("quadrature", "monte_carlo"):
                    v = volume_E(w, A, mcfg, n=cfg.n, method=method)
                    rep.add("E", cfg.n, c, T, kind, v.value, v.stderr, v.method, mcfg.rng_seed)


def cmd_orbit(cfg: ExperimentConfig, rep: Report) -> None:
    lattice = cfg.lattice_descriptor()
    sets = list(cfg.direction_sets) or [None]
    for c in cfg.c_list:
        for T in cfg.T_grid:
            for A in sets:
                oc = OrbitConfig(cfg.r, Window(T, c), A, lattice)
                res = orbit_chain_check(oc)
                if not res.passed:
                    rep.violations += 1
                rep.add(cfg.n, c, cfg.r, T, lattice.describe(), "full" if A is None else A.describe(), res.count_inner, res.integral, res.count_outer, res.integral / (T * cfg.r))


def cmd_calibrate(cfg: ExperimentConfig, rep: Report) -> None:
    T = cfg.T_grid[-1]
    first = None
    for c in cfg.c_list:
        mcfg = ConeMeasureConfig(1.0, max(cfg.mc_samples, 1000), cfg.seed)
        try:
            cal = calibrate(cfg.samples, Window(T, c), mcfg, n=cfg.n, lattice=cfg.lattice_descriptor())
        except Exception as e:  # calibration error is reported, not fatal
            rep.add(cfg.n, c, T, cfg.samples, math.nan, math.nan, 0, math.nan, f"error:{type(e).__name__}")
            rep.violations += 1
            continue
        first = cal.kappa if first is None else first
        delta = cal.kappa / first - 1
        rep.add(cfg.n, c, T, cfg.samples, cal.kappa, float(cal.slopes.mean()), cal.total_count, delta, "measured")


def selftest_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Deterministic invariant suite: group laws, enumeration oracle, routes, sandwich, orbit chains."""
    from .cone import eval_Q, iwasawa_decompose, random_group_element
    from .points import all_points_array, scan_near

    rng = np.random.default_rng([seed, 99])
    out = []

    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(30):
            g = random_group_element(n, rng, 2.0)
            f = iwasawa_decompose(g)
            worst = max(worst, float(np.max(np.abs(f.reconstruct().matrix - g.matrix))))
            x = rng.standard_normal(n + 2)
            worst = max(worst, abs(eval_Q(g.matrix @ x) - eval_Q(x)) / (1 + x @ x) / max(1.0, np.max(np.abs(g.matrix)) ** 2))
    out.append(("group_laws", worst <= 1e-9, f"max_residual={worst:.3e}"))

    bad = 0
    for n, qmax in ((1, 200), (2, 40)):
        q, P = all_points_array(qmax, n)
        for _ in range(5):
            a = rng.standard_normal(n + 1)
            a /= np.linalg.norm(a)
            c = float(rng.uniform(0.3, 2.0))
            s = scan_near(a, c, 1, qmax)
            near = {(int(qq), tuple(p)) for qq, p in zip(s.q, s.P.tolist())}
            d2 = np.sum((q[:, None] * a - P) ** 2, axis=1)
            brute = {(int(qq), tuple(p)) for qq, p, d in zip(q, P.tolist(), d2) if d < c * c}
            bad += near != brute
    out.append(("enumeration_oracle", bad == 0, f"mismatches={bad}"))

    try:
        for n, T in ((1, 8.0), (2, 6.0), (3, 4.0)):
            for _ in range(3):
                a = rng.standard_normal(n + 1)
                count_table(a / np.linalg.norm(a), [0.7, 1.3], [T / 2, T])
        out.append(("counting_routes", True, "direct == rotated"))
    except ConsistencyError as e:
        out.append(("counting_routes", False, str(e)))

    viol = 0
    for n, qmax in ((1, 2000), (2, 100)):
        q, P = all_points_array(qmax, n)
        X = np.concatenate([P, q[:, None]], axis=1)
        for c in (0.5, 1.0, 2.0):
            k = SandwichConstants.for_c(c)
            for T in (k.T_valid + 0.01, k.T_valid + 2):
                inner, outer = sandwich_masks(X, Window(T, c), k)
                viol += int(inner.sum() + outer.sum())
    out.append(("sandwich", viol == 0, f"violations={viol}"))

    fails = 0
    for n in (1, 2):
        for lat in (LatticeDescriptor(n), LatticeDescriptor.of(make_u_y([0.3] * n))):
            for c in (1.0, 1.5):
                fails += not orbit_chain_check(OrbitConfig(1.0, Window(6.0, c), None, lat)).passed
    out.append(("orbit_chains", fails == 0, f"violations={fails}"))
    return out


def cmd_selftest(cfg: ExperimentConfig, rep: Report) -> None:
    for name, ok, detail in selftest_checks(cfg.seed):
        rep.add(name, "PASS" if ok else "FAIL", detail)
        rep.violations += not ok


COMMANDS: dict[str, Callable[[ExperimentConfig, Report], None]] = {
    "count": cmd_count,
    "sweep": cmd_sweep,
    "spiral": cmd_spiral,
    "volume": cmd_volume,
    "orbit": cmd_orbit,
    "calibrate": cmd_calibrate,
    "selftest": cmd_selftest,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sphere_approx", description="Rational approximation on spheres via light-cone lattice points.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--n", type=int)
    p.add_argument("--c", help="comma-separated list of c")
    p.add_argument("--T", help="comma-separated increasing list of T")
    p.add_argument("--threads", type=int)
    p.add_argument("--alpha", help="random:<count> or explicit:a,b;c,d")
    p.add_argument("--A", help="direction sets, whitespace separated, or 'quadrants'")
    p.add_argument("--lattice", help="standard | random_rotation | g_t:<s> | u_y:<y1,...>")
    p.add_argument("--r", type=float, help="shell width for orbit")
    p.add_argument("--samples", type=int, help="targets for calibrate")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--timing", action="store_true", help="record elapsed_ms (breaks byte-identical output)")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        cfg = build_config(args)
    except (ConfigError, ValidationError, DimensionError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    rep = Report(args.command, cfg)
    try:
        COMMANDS[args.command](cfg, rep)
    except ConsistencyError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 1
    except (RangeError, ValidationError, DimensionError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    text = rep.text()
    if cfg.output_path in ("-", ""):
        sys.stdout.write(text)
    else:
        try:
            with open(cfg.output_path, "w") as fh:
                fh.write(text)
        except OSError as e:
            print(f"error: cannot write {cfg.output_path}: {e.strerror}", file=sys.stderr)
            return 2
    if rep.violations:
        print(f"{rep.violations} invariant violation(s)", file=sys.stderr)
        return 1
    return 0
