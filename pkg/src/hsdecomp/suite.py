"""Acceptance matrix: fixtures × fields × checks, with CSV/JSON report emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import traceback
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import atomic, czd, fields as fieldgen
from .hajlasz import hajlasz_norm_lp, mn_constant
from .maxfn import (LP_MAX_N, calderon_star, discrete_convolution, grad_maximal_star, grad_plus, grad_plus_ball,
                    grad_plus_ball_oracle, grand_maximal, hl_maximal, sobolev_sharp)
from .space import MetricMeasureSpace, build_space, discrete_gradient, doubling_profile

log = logging.getLogger(__name__)

CHECKS = {
    "A1": "pointwise N ≤ 2f★ and f★ ≤ (1+16c_d²)N",
    "A2": "Hajłasz norm vs ‖Nf‖₁ ratio, spread, certificate and feasibility bound",
    "A3": "Calderón–Zygmund postconditions and measured constants",
    "A4": "atomic decompositions: validity, identities, reconstruction, ℓ¹ control",
    "A5": "‖a⁺‖₁ for seeded H¹ (1,2)-atoms",
    "A6": "(∇f)⁺ domination by Nf and agreement with the vertex oracle",
    "A7": "discrete convolution gradient bounds and L¹ convergence",
    "A8": "scaling, translation, relabeling and decomposition equivariance",
}
DEFAULT_FIXTURES = ["path(4,1.0)", "cycle(8)", "grid(4x4)", "cloud(64,seed=7)", "cloud(256,seed=11)"]
DEFAULT_SPREAD_CLOUDS = ["cloud(16,seed=7)", "cloud(64,seed=7)", "cloud(256,seed=11)"]

A1_STAR_REL = 1e-12
A1_UPPER_REL = 1e-9
A1_RUNTIME = 60.0
A2_BRACKET = (1e-2, 1e2)
A2_RUNTIME = 300.0
SPREAD_MAX = 10.0
CONST_MAX = 1e3
K_MAX = 64
A5_MAX = 1e2
A7_MAX = 1e2
A7_SLACK = 0.05
INVARIANCE_TOL = 1e-9
CONV_RADII = (2.0, 1.0, 0.5, 0.25)
STAR_RADII = (0.5, 1.0, 2.0)


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    fixtures: list[str] = dc_field(default_factory=lambda: list(DEFAULT_FIXTURES))
    fields: list[str] | None = None
    checks: list[str] = dc_field(default_factory=lambda: list(CHECKS))
    q: float | None = None
    alpha_points: int = 5
    alphas: list[float] | None = None
    cz_flavors: list[str] = dc_field(default_factory=lambda: list(czd.FLAVORS))
    atomic_flavors: list[str] = dc_field(default_factory=lambda: list(atomic.DECOMP_FLAVORS))
    spread_clouds: list[str] = dc_field(default_factory=lambda: list(DEFAULT_SPREAD_CLOUDS))
    atoms_per_fixture: int = 20
    a5_lp_budget: int = 2000
    seed: int = 0
    grad_plus_max_n: int = 64
    oracle_max_n: int = 8
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.fields is None:
            self.fields = fieldgen.default_fields(self.seed)
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; expected a subset of {list(CHECKS)}")
        for spec in self.fields:
            name = spec.split("(")[0].strip().replace("_", "-")
            if name not in fieldgen.GENERATORS:
                raise ConfigError(f"unknown field generator {spec!r}")
        if self.alphas is not None:
            a = np.asarray(self.alphas, float)
            if not (np.all(a > 0) and np.all(np.diff(a) > 0)):
                raise ConfigError("alpha grid must be positive and strictly ascending")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.atoms_per_fixture < 1 or self.a5_lp_budget < 1:
            raise ConfigError("atoms_per_fixture and a5_lp_budget must be at least 1")
        if self.alpha_points < 1:
            raise ConfigError("alpha_points must be at least 1")
        for fl in self.cz_flavors:
            czd.flavor_tag(fl)
        for fl in self.atomic_flavors:
            if atomic.atom_flavor(fl) not in atomic.DECOMP_FLAVORS:
                raise ConfigError(f"atomic flavor {fl!r} has no decomposition")

    @classmethod
    def from_dict(cls, obj: dict) -> "SuiteConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)


@dataclass
class Row:
    check: str
    fixture: str
    field: str
    metric: str
    value: float
    ceiling: float
    passed: bool
    n: int = 0
    detail: str = ""
    runtime: float = 0.0


@dataclass
class CheckSummary:
    check: str
    passed: bool
    rows: int
    failed: int
    worst: dict
    runtime: float


@dataclass
class SuiteReport:
    rows: list[Row]
    summary: dict[str, CheckSummary]
    fingerprints: dict[str, dict]
    runtime: float
    config: dict

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.summary.values())

    def lines(self) -> list[str]:
        out = []
        for cid, s in self.summary.items():
            out.append(f"{cid} {'PASS' if s.passed else 'FAIL'}  rows={s.rows} failed={s.failed}  "
                       f"{CHECKS[cid]}  ({s.runtime:.1f}s)")
        return out

    def summary_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": {k: {"passed": v.passed, "rows": v.rows, "failed": v.failed, "worst": v.worst}
                           for k, v in self.summary.items()},
                "fixtures": self.fingerprints, "config": self.config}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "rows.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "fixture", "n", "field", "metric", "value", "ceiling", "passed", "detail"])
            for r in self.rows:
                if r.metric == "runtime_s":
                    continue
                w.writerow([r.check, r.fixture, r.n, r.field, r.metric, _fmt(r.value), _fmt(r.ceiling),
                            int(r.passed), r.detail])
        (out / "summary.json").write_text(json.dumps(self.summary_dict(), indent=2, default=_json_default) + "\n",
                                          encoding="utf-8")
        timings = {"total": self.runtime, "checks": {k: v.runtime for k, v in self.summary.items()},
                   "rows": [[r.check, r.fixture, r.field, r.metric, r.runtime] for r in self.rows]}
        (out / "timings.json").write_text(json.dumps(timings, indent=1) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else ("inf" if x > 0 else ("-inf" if x < 0 else "nan"))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


# --------------------------------------------------------------------------
# fixture cache
# --------------------------------------------------------------------------

class Fixture:
    """A space with lazily computed per-field quantities shared between checks."""

    def __init__(self, spec: str, field_specs: list[str], seed: int, q: float | None):
        self.spec = spec
        self.space: MetricMeasureSpace = build_space(spec)
        self.profile = doubling_profile(self.space)
        self.q_override = q
        self.fields = {fs: fieldgen.make_field(self.space, fs, seed) for fs in field_specs}
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return self.space.n

    def q(self) -> float:
        if self.q_override is None:
            return czd.default_q(self.space)
        return czd.check_q(self.space, self.q_override)

    def get(self, key: str, fs: str):
        k = (key, fs)
        if k not in self._cache:
            f = self.fields[fs]
            fn = {"nf": sobolev_sharp, "star": calderon_star}[key]
            self._cache[k] = fn(self.space, f)
        return self._cache[k]

    def fingerprint(self) -> dict:
        lo, _ = czd.admissible_q(self.space)
        q = self.q_override if self.q_override is not None else (lo + 1) / 2
        return {"n": self.n, "c_d": self.profile.c_d, "s": self.profile.s, "q": q,
                "spacing": self.space.spacing, "edges": int(len(self.space.edges))}


def _leq(lhs, rhs, rel):
    """Elementwise ``lhs ≤ rhs`` with relative slack scaled by the larger magnitude in play."""
    lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
    scale = max(float(np.abs(lhs).max(initial=0.0)), float(np.abs(rhs).max(initial=0.0)), 1e-300)
    return lhs <= rhs + rel * np.maximum(np.abs(rhs), scale * 1e-3)


def _max_ratio(num, den, tol=1e-12, floor=0.0) -> float:
    """Max of num/den over points where num is not rounding noise (relative to itself or ``floor``)."""
    num, den = np.asarray(num, float), np.asarray(den, float)
    scale = max(float(np.abs(num).max(initial=0.0)), floor, 1e-300)
    live = num > tol * scale
    if not np.any(live):
        return 0.0
    if np.any(den[live] <= 0):
        return math.inf
    return float((num[live] / den[live]).max())


def _rel_diff(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)), 1e-300)
    return float(np.abs(a - b).max(initial=0.0) / scale)


# --------------------------------------------------------------------------
# checks: each returns a list of rows for one fixture
# --------------------------------------------------------------------------

def check_a1(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    rows = []
    cd = fx.profile.c_d
    upper = 1 + 16 * cd ** 2
    for fs in fx.fields:
        nf, st = fx.get("nf", fs), fx.get("star", fs)
        ok1 = bool(_leq(nf, 2 * st, A1_STAR_REL).all())
        rows.append(Row("A1", fx.spec, fs, "N/star", _max_ratio(nf, st), 2.0, ok1))
        ok2 = bool(_leq(st, upper * nf, A1_UPPER_REL).all())
        rows.append(Row("A1", fx.spec, fs, "star/N", _max_ratio(st, nf), upper, ok2, detail=f"c_d={cd:.6g}"))
    return rows


def check_a2(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    rows = []
    sp = fx.space
    for fs, f in fx.fields.items():
        t0 = time.perf_counter()
        cert = hajlasz_norm_lp(sp, f)
        nf = fx.get("nf", fs)
        nf1 = float(np.dot(nf, sp.measure))
        dt = time.perf_counter() - t0
        if cert.value == 0 and nf1 == 0:
            rows.append(Row("A2", fx.spec, fs, "N1/hajlasz", 1.0, A2_BRACKET[1], True, detail="constant field",
                            runtime=dt))
            continue
        ratio = nf1 / cert.value if cert.value > 0 else math.inf
        ok = A2_BRACKET[0] <= ratio <= A2_BRACKET[1]
        rows.append(Row("A2", fx.spec, fs, "N1/hajlasz", ratio, A2_BRACKET[1], ok,
                        detail=f"value={cert.value:.9g} dual={cert.dual_bound:.9g}", runtime=dt))
        iu = np.triu_indices(sp.n, 1)
        scale = float(np.abs(f).max() / sp.dist[iu].min())
        rows.append(Row("A2", fx.spec, fs, "-slack/scale", -cert.slack / scale, 1e-9, cert.slack >= -1e-9 * scale))
        mn = mn_constant(sp, f, nf)
        bound = 2 * mn.value * nf1
        rows.append(Row("A2", fx.spec, fs, "hajlasz/(2 mn N1)", cert.value / bound if bound > 0 else math.inf, 1.0,
                        cert.value <= bound * (1 + 1e-9), detail=f"mn={mn.value:.6g} pair={mn.pair}"))
    return rows


def spread_a2(cfg: SuiteConfig) -> list[Row]:
    """Ratio ‖Nf‖₁ / Hajłasz norm on clouds of growing size, per field generator."""
    rows = []
    ratios: dict[str, list[tuple[str, float]]] = {fs: [] for fs in cfg.fields}
    for spec in cfg.spread_clouds:
        try:
            fx = Fixture(spec, cfg.fields, cfg.seed, None)
        except Exception as exc:
            rows.append(Row("A2", spec, "*", "spread:error", math.nan, SPREAD_MAX, False, detail=str(exc)))
            continue
        for fs, f in fx.fields.items():
            cert = hajlasz_norm_lp(fx.space, f)
            nf1 = float(np.dot(fx.get("nf", fs), fx.space.measure))
            if cert.value > 0:
                ratios[fs].append((spec, nf1 / cert.value))
                rows.append(Row("A2", spec, fs, "spread:N1/hajlasz", nf1 / cert.value, A2_BRACKET[1],
                                A2_BRACKET[0] <= nf1 / cert.value <= A2_BRACKET[1], n=fx.n))
    for fs, vals in ratios.items():
        if len(vals) < 2:
            continue
        v = np.array([x[1] for x in vals])
        spread = float(v.max() / v.min())
        rows.append(Row("A2", "clouds", fs, "spread", spread, SPREAD_MAX, spread <= SPREAD_MAX,
                        detail=" ".join(f"{s}:{r:.4g}" for s, r in vals)))
    return rows


def _alpha_grid(h: np.ndarray, cfg: SuiteConfig) -> np.ndarray:
    if cfg.alphas is not None:
        return np.asarray(cfg.alphas, float)
    grid = np.linspace(h.min(), h.max(), cfg.alpha_points)
    return grid[grid > 0]


def check_a3(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    rows = []
    sp = fx.space
    q = fx.q()
    for flavor in cfg.cz_flavors:
        flavor = czd.flavor_tag(flavor)
        consts = {"C_g": 0.0, "C_b1": 0.0, "C_bq": 0.0, "C_B": 0.0}
        for fs, f in fx.fields.items():
            t0 = time.perf_counter()
            data = czd.level_data(sp, f, q, flavor, nf=fx.get("nf", fs))
            if not np.any(data.level > 0):
                rows.append(Row("A3", fx.spec, fs, f"{flavor}:residual", 0.0, 1e-9, True, detail="constant field"))
                continue
            scale = max(1.0, float(np.abs(f).max()))
            worst_res, worst_k, support, m11_c, m11_star = 0.0, 0, True, 0.0, 0.0
            for alpha in _alpha_grid(data.level, cfg):
                dec = czd.cz_decompose(sp, f, q, float(alpha), flavor, data)
                rep = czd.verify_cz(sp, dec)
                worst_res = max(worst_res, rep.residual / scale)
                worst_k = max(worst_k, rep.K)
                support &= rep.support_ok
                for k in consts:
                    consts[k] = max(consts[k], getattr(rep, k))
                if flavor == "m11" and dec.cover is not None:
                    m11_c = max(m11_c, float(np.abs(dec.c).max() / alpha))
                    m11_star = max(m11_star, float(data.star[dec.selected].max() / alpha))
            dt = time.perf_counter() - t0
            tag = f"{flavor}"
            rows.append(Row("A3", fx.spec, fs, f"{tag}:residual", worst_res, 1e-9, worst_res <= 1e-9, runtime=dt))
            rows.append(Row("A3", fx.spec, fs, f"{tag}:support", 0.0 if support else 1.0, 0.0, support))
            rows.append(Row("A3", fx.spec, fs, f"{tag}:K", worst_k, K_MAX, worst_k <= K_MAX))
            if flavor == "m11":
                rows.append(Row("A3", fx.spec, fs, "m11:|c|/alpha", m11_c, 2.0, m11_c <= 2.0))
                cq = czd.c_q(q)
                rows.append(Row("A3", fx.spec, fs, "m11:star(x_i)/alpha", m11_star, cq, m11_star <= cq))
        for k, v in consts.items():
            rows.append(Row("A3", fx.spec, "*", f"{flavor}:{k}", v, CONST_MAX, v <= CONST_MAX))
    return rows


def check_a4(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    rows = []
    sp = fx.space
    q = fx.q()
    mu = sp.measure
    for flavor in cfg.atomic_flavors:
        flavor = atomic.atom_flavor(flavor)
        c_lam = c_res = 0.0
        for fs, f in fx.fields.items():
            t0 = time.perf_counter()
            dec = atomic.atomic_decompose(sp, f, flavor, q)
            rep = atomic.decomposition_report(sp, dec, fx.get("nf", fs))
            dt = time.perf_counter() - t0
            scale = max(1.0, float(np.abs(f).max()))
            rows.append(Row("A4", fx.spec, fs, f"{flavor}:failed_atoms", len(rep["failed_atoms"]), 0,
                            not rep["failed_atoms"], detail=f"atoms={rep['atoms']} j=[{dec.j_min},{dec.j_max}]",
                            runtime=dt))
            rows.append(Row("A4", fx.spec, fs, f"{flavor}:sum_error", rep["sum_error"] / scale, 1e-12,
                            rep["sum_error"] <= 1e-12 * scale))
            if flavor in atomic.MOMENT_FLAVORS:
                rows.append(Row("A4", fx.spec, fs, f"{flavor}:moment_sum_error", rep["moment_sum_error"] / scale,
                                1e-12, rep["moment_sum_error"] <= 1e-12 * scale))
            rec = rep["reconstruction"]
            ref = {"sup": scale, "l1": max(1.0, float(np.dot(np.abs(f), mu))),
                   "w11": max(1.0, float(np.dot(discrete_gradient(sp, f), mu)))}
            worst = max(rec[k] / ref[k] for k in rec)
            rows.append(Row("A4", fx.spec, fs, f"{flavor}:reconstruction", worst, 1e-9, worst <= 1e-9))
            c_lam = max(c_lam, rep["C_lambda"])
            c_res = max(c_res, rep.get("C_residual_grad", 0.0))
        rows.append(Row("A4", fx.spec, "*", f"{flavor}:C_lambda", c_lam, CONST_MAX, c_lam <= CONST_MAX))
        rows.append(Row("A4", fx.spec, "*", f"{flavor}:C_residual", c_res, CONST_MAX, c_res <= CONST_MAX))
    return rows


def check_a5(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    """Exact ‖a⁺‖₁ up to LP_MAX_N points; above that the certified upper end of a budgeted bracket."""
    sp = fx.space
    rng = np.random.default_rng([cfg.seed, zlib.crc32(fx.spec.encode())])
    budget = None if sp.n <= LP_MAX_N else cfg.a5_lp_budget
    worst, worst_lo, invalid = 0.0, 0.0, 0
    for _ in range(cfg.atoms_per_fixture):
        a, ball = atomic.random_h1_atom(sp, rng, 2.0)
        if not atomic.validate_atom(sp, a, ball, "h1", 2.0).passed:
            invalid += 1
        lo, hi = atomic.h1_atom_grand_maximal_bracket(sp, a, budget)
        worst, worst_lo = max(worst, hi), max(worst_lo, lo)
    kind = "exact" if budget is None else f"upper bound (lower {worst_lo:.4g}, {budget} LPs per atom)"
    return [Row("A5", fx.spec, "h1-atoms", "max ||a+||_1", worst, A5_MAX, worst <= A5_MAX and not invalid,
                detail=f"atoms={cfg.atoms_per_fixture} invalid={invalid} {kind}")]


def check_a6(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    sp = fx.space
    if sp.n > cfg.grad_plus_max_n:
        return []
    rows = []
    ceiling = 1.0 + float(sp.degree.max())
    for fs, f in fx.fields.items():
        t0 = time.perf_counter()
        gp, info = grad_plus(sp, f, return_details=True)
        nf = fx.get("nf", fs)
        dt = time.perf_counter() - t0
        ok = bool(_leq(gp, ceiling * nf, 1e-9).all())
        rows.append(Row("A6", fx.spec, fs, "gradplus/N", _max_ratio(gp, nf), ceiling, ok,
                        detail=f"solved={info['solved']} certified={info['certified']}", runtime=dt))
        if sp.n <= cfg.oracle_max_n:
            gap = 0.0
            for b in range(len(sp.balls)):
                alt = grad_plus_ball(sp, f, b).value
                ora = grad_plus_ball_oracle(sp, f, b)
                gap = max(gap, abs(alt - ora) / max(1.0, abs(ora)))
            rows.append(Row("A6", fx.spec, fs, "oracle_gap", gap, 1e-6, gap <= 1e-6))
    return rows


def check_a7(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    sp = fx.space
    rows = []
    h = sp.spacing
    mu = sp.measure
    for fs, f in fx.fields.items():
        nf = fx.get("nf", fs)
        floor = float(np.abs(f).max()) / h
        worst, K, errs = 0.0, 0, []
        for r in CONV_RADII:
            u, cov = discrete_convolution(sp, f, r * h)
            worst = max(worst, _max_ratio(discrete_gradient(sp, u), nf, floor=floor))
            K = max(K, cov.overlap)
            errs.append(float(np.dot(np.abs(u - f), mu)))
        rows.append(Row("A7", fx.spec, fs, "grad u_r/N", worst, A7_MAX, worst <= A7_MAX, detail=f"K={K}"))
        star = grad_maximal_star(sp, f, [r * h for r in STAR_RADII])
        ms = _max_ratio(star, nf, floor=floor)
        rows.append(Row("A7", fx.spec, fs, "Mstar/N", ms, A7_MAX, ms <= A7_MAX))
        tol = 1e-12 * max(1.0, float(np.dot(np.abs(f), mu)))
        growth = max((b / a if a > tol else (0.0 if b <= tol else math.inf)) for a, b in zip(errs, errs[1:]))
        rows.append(Row("A7", fx.spec, fs, "L1 error growth", growth, 1 + A7_SLACK, growth <= 1 + A7_SLACK,
                        detail=" ".join(f"{e:.4g}" for e in errs)))
    return rows


def _permuted_space(sp: MetricMeasureSpace, perm: np.ndarray) -> MetricMeasureSpace:
    """Relabel so that new point k is old point perm[k]."""
    inv = np.argsort(perm)
    edges = inv[sp.edges]
    coords = None if sp.coords is None else sp.coords[perm]
    return MetricMeasureSpace(sp.dist[np.ix_(perm, perm)], sp.measure[perm], edges, coords, sp.name + "-perm")


def check_a8(fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    sp = fx.space
    rows = []
    mode = "exact_lp" if sp.n <= cfg.grad_plus_max_n else "tent"
    ops = {"N": sobolev_sharp, "star": calderon_star, "M": hl_maximal,
           "plus": lambda s, f: grand_maximal(s, f, mode)}
    rng = np.random.default_rng([cfg.seed, zlib.crc32(fx.spec.encode()), 8])
    perm = rng.permutation(sp.n)
    psp = _permuted_space(sp, perm)
    q = fx.q()
    for fs, f in fx.fields.items():
        worst = {}
        base = {k: op(sp, f) for k, op in ops.items()}
        for a in (-2.5, 3.0):
            for k, op in ops.items():
                worst[f"scale:{k}"] = max(worst.get(f"scale:{k}", 0.0), _rel_diff(op(sp, a * f), abs(a) * base[k]))
        shift = 1.75 * (1 + float(np.abs(f).max()))
        for k in ("N", "star"):
            worst[f"translate:{k}"] = _rel_diff(ops[k](sp, f + shift), base[k])
        for k, op in ops.items():
            worst[f"relabel:{k}"] = _rel_diff(op(psp, f[perm]), base[k][perm])
        # CZ scale equivariance (homogeneous)
        data = czd.level_data(sp, f, q, "homogeneous", nf=fx.get("nf", fs))
        levels = np.unique(data.level)
        if len(levels) > 1:
            mid = len(levels) // 2
            alpha = float((levels[mid - 1] + levels[mid]) / 2)
            d1 = czd.cz_decompose(sp, f, q, alpha, "homogeneous", data)
            d2 = czd.cz_decompose(sp, 3.0 * f, q, 3.0 * alpha, "homogeneous")
            same = np.array_equal(d1.omega, d2.omega)
            worst["cz:omega"] = 0.0 if same else 1.0
            if same:
                worst["cz:fields"] = max(_rel_diff(d2.g, 3 * d1.g), _rel_diff(d2.b, 3 * d1.b) if d1.b.size else 0.0)
        # atomic j-shift under f -> 2f
        a1 = atomic.atomic_decompose(sp, f, "hs_moment", q)
        a2 = atomic.atomic_decompose(sp, 2.0 * f, "hs_moment", q)
        if a1.j_min is None:
            worst["atomic:shift"] = 0.0 if a2.j_min is None else 1.0
        else:
            ok = (a2.j_min == a1.j_min + 1 and a2.j_max == a1.j_max + 1 and len(a1.atoms) == len(a2.atoms))
            worst["atomic:shift"] = 0.0 if ok else 1.0
            if ok and a1.atoms:
                worst["atomic:atoms"] = max(_rel_diff(x.a, y.a) for x, y in zip(a1.atoms, a2.atoms))
                worst["atomic:lambda"] = max(abs(y.lam - 2 * x.lam) / (2 * x.lam) for x, y in zip(a1.atoms, a2.atoms))
        for k, v in worst.items():
            rows.append(Row("A8", fx.spec, fs, k, v, INVARIANCE_TOL, v <= INVARIANCE_TOL))
    return rows


CHECK_FUNCS = {"A1": check_a1, "A2": check_a2, "A3": check_a3, "A4": check_a4,
               "A5": check_a5, "A6": check_a6, "A7": check_a7, "A8": check_a8}


def _spread_rows(rows: list[Row], check: str) -> list[Row]:
    """Per metric: max/min over fixtures of per-fixture sups (zeros excluded)."""
    out = []
    by_metric: dict[str, dict[str, float]] = {}
    for r in rows:
        if r.check != check or r.field != "*":
            continue
        by_metric.setdefault(r.metric, {})[r.fixture] = r.value
    for metric, per_fx in by_metric.items():
        live = {k: v for k, v in per_fx.items() if v > 0 and np.isfinite(v)}
        if len(live) < 2:
            spread = 1.0
        else:
            spread = max(live.values()) / min(live.values())
        out.append(Row(check, "matrix", "*", f"spread:{metric}", spread, SPREAD_MAX, spread <= SPREAD_MAX,
                       detail=" ".join(f"{k}:{v:.4g}" for k, v in per_fx.items())))
    return out


def _run_unit(cid: str, fx: Fixture, cfg: SuiteConfig) -> list[Row]:
    t1 = time.perf_counter()
    try:
        new = CHECK_FUNCS[cid](fx, cfg)
    except Exception as exc:
        log.debug("check %s on %s failed:\n%s", cid, fx.spec, traceback.format_exc())
        new = [Row(cid, fx.spec, "*", "error", math.nan, math.nan, False, detail=f"{type(exc).__name__}: {exc}")]
    for r in new:
        r.n = r.n or fx.n
    if new and not new[0].runtime:
        new[0].runtime = time.perf_counter() - t1
    return new


def _pool_unit(cid: str, spec: str, cfg: SuiteConfig) -> tuple[list[Row], float]:
    t0 = time.perf_counter()
    fx = Fixture(spec, cfg.fields, cfg.seed, cfg.q)
    return _run_unit(cid, fx, cfg), time.perf_counter() - t0


def run_suite(config: SuiteConfig | dict | None = None) -> SuiteReport:
    """Run the configured checks over the fixture matrix; failures are recorded per row.

    With ``workers > 1`` the (check, fixture) units run in a process pool; rows are
    reassembled in config order so the output does not depend on scheduling.
    """
    cfg = config if isinstance(config, SuiteConfig) else SuiteConfig.from_dict(config or {})
    t_start = time.perf_counter()
    rows: list[Row] = []
    fixtures: dict[str, Fixture] = {}
    fingerprints: dict[str, dict] = {}
    check_time: dict[str, float] = {c: 0.0 for c in cfg.checks}
    if cfg.checks:
        for spec in cfg.fixtures:
            try:
                fixtures[spec] = Fixture(spec, cfg.fields, cfg.seed, cfg.q)
                fingerprints[spec] = {**fixtures[spec].fingerprint(), "seed": cfg.seed}
            except Exception as exc:
                for cid in cfg.checks:
                    rows.append(Row(cid, spec, "*", "fixture:error", math.nan, math.nan, False, detail=str(exc)))
    unit_rows: dict[tuple[str, str], list[Row]] = {}
    if cfg.workers > 1 and fixtures:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = {(cid, spec): pool.submit(_pool_unit, cid, spec, cfg) for cid in cfg.checks for spec in fixtures}
            for key, fut in futs.items():
                try:
                    unit_rows[key], dt = fut.result()
                except Exception as exc:
                    unit_rows[key], dt = [Row(key[0], key[1], "*", "error", math.nan, math.nan, False,
                                              detail=f"{type(exc).__name__}: {exc}")], 0.0
                check_time[key[0]] += dt
    for cid in cfg.checks:
        t0 = time.perf_counter()
        for spec, fx in fixtures.items():
            rows.extend(unit_rows[(cid, spec)] if unit_rows else _run_unit(cid, fx, cfg))
        if cid == "A2":
            try:
                rows.extend(spread_a2(cfg))
            except Exception as exc:
                rows.append(Row("A2", "clouds", "*", "spread:error", math.nan, SPREAD_MAX, False, detail=str(exc)))
        if cid in ("A3", "A4"):
            rows.extend(_spread_rows(rows, cid))
        check_time[cid] += time.perf_counter() - t0
        budget = {"A1": A1_RUNTIME, "A2": A2_RUNTIME}.get(cid)
        if budget is not None:
            rows.append(Row(cid, "matrix", "*", "runtime_s", check_time[cid], budget, check_time[cid] <= budget,
                            runtime=check_time[cid]))
    summary = {}
    for cid in cfg.checks:
        mine = [r for r in rows if r.check == cid]
        worst: dict[str, float] = {}
        for r in mine:
            if r.metric != "runtime_s" and np.isfinite(r.value):
                worst[r.metric] = max(worst.get(r.metric, -math.inf), float(r.value))
        failed = sum(not r.passed for r in mine)
        summary[cid] = CheckSummary(cid, failed == 0, len(mine), failed, worst, check_time[cid])
    cfg_dict = {k: v for k, v in asdict(cfg).items() if k not in ("out", "workers")}
    report = SuiteReport(rows, summary, fingerprints, time.perf_counter() - t_start, cfg_dict)
    if cfg.out:
        report.write(cfg.out)
    return report


def emit_plotdata(report: SuiteReport, out_dir) -> list[Path]:
    """One CSV per check: a row per fixture (``fixture, n``) and a column per metric holding its worst value."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for cid in report.summary:
        table: dict[tuple[int, str], dict[str, float]] = {}
        metrics: list[str] = []
        for r in report.rows:
            if r.check != cid or r.metric == "runtime_s" or r.fixture in ("matrix", "clouds"):
                continue
            row = table.setdefault((r.n, r.fixture), {})
            if r.metric not in metrics:
                metrics.append(r.metric)
            v = float(r.value)
            row[r.metric] = max(row.get(r.metric, -math.inf), v) if np.isfinite(v) else v
        metrics.sort()
        path = out / f"plot_{cid}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["fixture", "n", *metrics])
            for (n, fixture), vals in sorted(table.items()):
                w.writerow([fixture, n, *(_fmt(vals[m]) if m in vals else "" for m in metrics)])
        written.append(path)
    return written
