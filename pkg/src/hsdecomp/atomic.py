"""Atomic decompositions across dyadic heights, atom validation and reconstruction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .czd import CZDecomposition, LevelData, check_q, cz_decompose, level_data, verify_cz
from .maxfn import grand_maximal, grand_maximal_bounds, sobolev_sharp
from .space import Ball, MetricMeasureSpace, discrete_gradient, doubling_profile, make_ball

ATOM_FLAVORS = ("h1", "hs_moment", "hs_size", "hs_nonhomog", "ls")
DECOMP_FLAVORS = ("hs_moment", "hs_size", "hs_nonhomog", "ls")
CZ_FLAVOR = {"hs_moment": "homogeneous", "hs_size": "homogeneous", "hs_nonhomog": "tilde", "ls": "m11"}
MOMENT_FLAVORS = ("hs_moment", "hs_nonhomog")
REL_SLACK = 1e-9


class AtomicError(ValueError):
    pass


def atom_flavor(name: str) -> str:
    tag = name.replace("-", "_")
    if tag not in ATOM_FLAVORS:
        raise AtomicError(f"unknown atom flavor {name!r}; expected one of {ATOM_FLAVORS}")
    return tag


def lebesgue_norm(values, mu, t: float) -> float:
    v = np.abs(np.asarray(values, float))
    if math.isinf(t):
        return float(v.max()) if len(v) else 0.0
    return float(np.dot(v ** t, mu) ** (1 / t))


def size_exponent(mass: float, t: float) -> float:
    """``μ(B)^{-1/t'}`` where ``t'`` is the conjugate exponent."""
    return mass ** (1 / t - 1) if not math.isinf(t) else 1 / mass


def sobolev_exponent(space: MetricMeasureSpace, q: float) -> float:
    """``q* = sq/(s-q)``, infinite when ``q ≥ s``."""
    s = doubling_profile(space).s
    return math.inf if q >= s else s * q / (s - q)


@dataclass
class AtomReport:
    passed: bool
    ratios: dict
    failures: list[str]


def validate_atom(space: MetricMeasureSpace, a, ball: Ball, flavor: str, t: float = 2.0) -> AtomReport:
    """Check support, size/gradient bounds and the moment or ``L¹`` condition for one atom."""
    flavor = atom_flavor(flavor)
    a = np.asarray(a, dtype=float)
    mu = space.measure
    failures: list[str] = []
    outside = np.ones(space.n, dtype=bool)
    outside[ball.members] = False
    stray = np.nonzero(outside & (a != 0))[0]
    if len(stray):
        failures.append(f"support: point {int(stray[0])} lies outside the ball")
    bound = size_exponent(ball.mass, t)
    grad = lebesgue_norm(discrete_gradient(space, a), mu, t)
    size = lebesgue_norm(a, mu, t)
    l1 = float(np.dot(np.abs(a), mu))
    ratios: dict = {}
    if flavor == "h1":
        ratios["size"] = size / bound
    elif flavor == "hs_nonhomog":
        ratios["w1t"] = (size + grad) / bound
    else:
        ratios["grad"] = grad / bound
    if flavor == "hs_size":
        ratios["l1"] = l1 / ball.radius
    elif flavor == "ls":
        ratios["l1"] = l1 / min(1.0, ball.radius)
    for k, v in ratios.items():
        if v > 1 + REL_SLACK:
            failures.append(f"{k}: ratio {v:.6g} exceeds 1")
    if flavor in ("h1", "hs_moment", "hs_nonhomog"):
        mom = abs(float(np.dot(a, mu)))
        amax = float(np.abs(a).max()) if len(a) else 0.0
        ratios["moment"] = mom
        if mom > REL_SLACK * ball.mass * amax:
            failures.append(f"moment: |∫a| = {mom:.3g}")
    return AtomReport(not failures, ratios, failures)


@dataclass
class Atom:
    level: int
    index: int
    a: np.ndarray
    ball: Ball
    lam: float

    def to_dict(self) -> dict:
        nz = np.nonzero(self.a)[0]
        return {"level": self.level, "index": self.index, "ball": self.ball.to_dict(), "lambda": self.lam,
                "values": {str(int(k)): float(self.a[k]) for k in nz}}


@dataclass
class LevelAudit:
    j: int
    pieces: int
    sum_error: float  # ‖Σ_k ℓ_k^j - ℓ^j‖∞
    moment_sum_error: float  # max_l |Σ_k c_{k,l}|
    radius_ratio: float  # max r_l^{j+1}/r_k^j over interacting pairs


@dataclass
class AtomicDecomposition:
    flavor: str
    q: float
    t: float
    field: np.ndarray
    atoms: list[Atom]
    residual: np.ndarray
    gamma: float
    j_min: int | None
    j_max: int | None
    levels: dict[int, CZDecomposition]
    audit: list[LevelAudit]
    pre_atom_sup: float = 0.0  # max ‖ℓ_k^j‖∞ / 2^j
    data: LevelData | None = None
    notes: list[str] = dc_field(default_factory=list)

    @property
    def l1_sum(self) -> float:
        return float(sum(abs(at.lam) for at in self.atoms))

    def to_dict(self) -> dict:
        return {"flavor": self.flavor, "q": self.q, "t": None if math.isinf(self.t) else self.t,
                "gamma": self.gamma, "j_min": self.j_min, "j_max": self.j_max,
                "atoms": [a.to_dict() for a in self.atoms],
                "residual": [float(v) for v in self.residual], "l1_sum": self.l1_sum}


def _enclosing_ball(space: MetricMeasureSpace, center: int, support: np.ndarray) -> Ball:
    sd = space.balls.sorted_dist[center]
    reach = float(space.dist[center, support].max()) if len(support) else 0.0
    return make_ball(space, center, max(reach, float(sd[1])) if space.n > 1 else reach)


def _pre_atoms(dec_j: CZDecomposition, dec_up: CZDecomposition, moment: bool, ell: np.ndarray, mu):
    """Pre-atoms ``ℓ_k^j`` of one level and the correction matrix ``c_{k,l}``."""
    chi_k = dec_j.pu.chi
    if not moment:
        return ell[None, :] * chi_k, None
    pieces = chi_k * dec_j.field[None, :] - chi_k * dec_j.c[:, None]  # b_k^j
    if dec_up.cover is None:
        return pieces, np.zeros((len(chi_k), 0))
    b_up, chi_up = dec_up.b, dec_up.pu.chi
    mass_up = chi_up @ mu
    overlap = (chi_k * mu) @ b_up.T  # Σ b_l^{j+1} χ_k^j μ, shape (K, L)
    ckl = overlap / mass_up[None, :]
    pre = pieces - chi_k * b_up.sum(axis=0)[None, :] + ckl @ chi_up
    return pre, ckl


def atomic_decompose(space: MetricMeasureSpace, field, flavor: str, q: float | None = None,
                     grand_mode: str | None = None) -> AtomicDecomposition:
    """Decompose ``f`` into normalised atoms over heights ``2^j`` plus a coarse residual."""
    from .czd import default_q

    flavor = atom_flavor(flavor)
    if flavor not in DECOMP_FLAVORS:
        raise AtomicError(f"flavor {flavor!r} has no decomposition; expected one of {DECOMP_FLAVORS}")
    q = default_q(space) if q is None else check_q(space, q)
    f = np.asarray(field, dtype=float)
    t = sobolev_exponent(space, q)
    mu = space.measure
    if np.ptp(f) == 0:
        return AtomicDecomposition(flavor, q, t, f, [], f.copy(), 0.0, None, None, {}, [])
    cz_flavor = CZ_FLAVOR[flavor]
    data = level_data(space, f, q, cz_flavor, grand_mode=grand_mode)
    h = data.level
    j_max = math.ceil(math.log2(h.max()))
    j_min = math.ceil(math.log2(h.min()))
    while (h > 2.0 ** j_min).all():
        j_min += 1
    levels = {j: cz_decompose(space, f, q, 2.0 ** j, cz_flavor, data) for j in range(j_min, j_max + 1)}
    moment = flavor in MOMENT_FLAVORS
    raw: list[tuple[int, int, np.ndarray, Ball]] = []
    audit: list[LevelAudit] = []
    pre_sup = 0.0
    for j in range(j_min, j_max):
        dj, dup = levels[j], levels[j + 1]
        ell = dup.g - dj.g
        if dj.cover is None:
            audit.append(LevelAudit(j, 0, float(np.abs(ell).max()), 0.0, 0.0))
            continue
        pre, ckl = _pre_atoms(dj, dup, moment, ell, mu)
        sum_err = float(np.abs(pre.sum(axis=0) - ell).max())
        mom_err = float(np.abs(ckl.sum(axis=0)).max()) if ckl is not None and ckl.size else 0.0
        ratio = 0.0
        if dup.cover is not None:
            touch = (dj.pu.chi > 0).astype(float) @ (dup.pu.chi > 0).astype(float).T
            kk, ll = np.nonzero(touch)
            if len(kk):
                ratio = float((dup.cover.radii[ll] / dj.cover.radii[kk]).max())
        audit.append(LevelAudit(j, len(pre), sum_err, mom_err, ratio))
        for k, lk in enumerate(pre):
            if not np.any(lk):
                continue
            pre_sup = max(pre_sup, float(np.abs(lk).max() / 2.0 ** j))
            ball = _enclosing_ball(space, int(dj.cover.centers[k]), np.nonzero(lk)[0])
            raw.append((j, k, lk, ball))
    gamma = 0.0
    for j, _, lk, ball in raw:
        gamma = max(gamma, _normaliser(space, lk, ball, flavor, t) / 2.0 ** j)
    atoms = []
    for j, k, lk, ball in raw:
        lam = gamma * 2.0 ** j * ball.mass
        atoms.append(Atom(j, k, lk / lam, ball, lam))
    notes = ["finite space: coarse residual g^{j_min} retained"]
    return AtomicDecomposition(flavor, q, t, f, atoms, levels[j_min].g.copy(), gamma, j_min, j_max, levels, audit,
                               pre_sup, data, notes)


def _normaliser(space: MetricMeasureSpace, ell, ball: Ball, flavor: str, t: float) -> float:
    """Smallest ``γ 2^j`` making ``ℓ / (γ 2^j μ(B'))`` an admissible atom."""
    mu = space.measure
    scale = ball.mass ** (1 / t) if not math.isinf(t) else 1.0
    grad = lebesgue_norm(discrete_gradient(space, ell), mu, t)
    if flavor == "hs_nonhomog":
        return (lebesgue_norm(ell, mu, t) + grad) / scale
    out = grad / scale
    l1 = float(np.dot(np.abs(ell), mu))
    if flavor == "hs_size":
        out = max(out, l1 / (ball.mass * ball.radius))
    elif flavor == "ls":
        out = max(out, l1 / (ball.mass * min(1.0, ball.radius)))
    return out


def reconstruct(space: MetricMeasureSpace, dec: AtomicDecomposition, field=None):
    """Rebuild ``residual + Σ λ a`` and measure the error in sup, ``L¹`` and ``Ẇ¹₁``."""
    f = dec.field if field is None else np.asarray(field, float)
    total = dec.residual.copy()
    for at in dec.atoms:
        total += at.lam * at.a
    err = total - f
    mu = space.measure
    return total, {"sup": float(np.abs(err).max()), "l1": float(np.dot(np.abs(err), mu)),
                   "w11": float(np.dot(discrete_gradient(space, err), mu))}


def decomposition_report(space: MetricMeasureSpace, dec: AtomicDecomposition, nf=None) -> dict:
    """Acceptance-facing numbers for one atomic decomposition."""
    mu = space.measure
    f = dec.field
    nf = sobolev_sharp(space, f) if nf is None else nf
    _, rec = reconstruct(space, dec)
    fails = [i for i, at in enumerate(dec.atoms) if not validate_atom(space, at.a, at.ball, dec.flavor, dec.t).passed]
    norm = float(np.dot(nf, mu)) + (float(np.dot(np.abs(f), mu)) if dec.flavor == "ls" else 0.0)
    out = {"atoms": len(dec.atoms), "failed_atoms": fails, "gamma": dec.gamma, "l1_sum": dec.l1_sum,
           "C_lambda": dec.l1_sum / norm if norm > 0 else 0.0, "reconstruction": rec,
           "sum_error": max((a.sum_error for a in dec.audit), default=0.0),
           "moment_sum_error": max((a.moment_sum_error for a in dec.audit), default=0.0),
           "radius_ratio": max((a.radius_ratio for a in dec.audit), default=0.0),
           "pre_atom_sup": dec.pre_atom_sup, "j_min": dec.j_min, "j_max": dec.j_max}
    if dec.j_min is not None:
        g = dec.residual
        a = 2.0 ** dec.j_min
        out["C_residual_grad"] = float(discrete_gradient(space, g).max() / a)
        out["C_residual_sup"] = float(np.abs(g).max() / a)
        out["cz_min_level"] = verify_cz(space, dec.levels[dec.j_min], nf).to_dict()
    return out


def h1_atom_grand_maximal_check(space: MetricMeasureSpace, a, ball: Ball | None = None, t: float = 2.0) -> float:
    """``‖a⁺‖₁`` with the exact-LP grand maximal function."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        return 0.0
    return float(np.dot(grand_maximal(space, a, "exact_lp"), space.measure))


def h1_atom_grand_maximal_bracket(space: MetricMeasureSpace, a, max_solves: int | None = None):
    """``(lower, upper)`` for ``‖a⁺‖₁`` from a budgeted exact-LP sweep; equal when unbudgeted."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        return 0.0, 0.0
    lo, hi, _ = grand_maximal_bounds(space, a, max_solves)
    return float(np.dot(lo, space.measure)), float(np.dot(hi, space.measure))


def random_h1_atom(space: MetricMeasureSpace, rng: np.random.Generator, t: float = 2.0):
    """Seeded ``(1,t)`` atom: zero-mean random values on a random tight ball, at the size bound."""
    fam = space.balls
    b = int(rng.integers(len(fam)))
    ball = fam.ball(b)
    mu = space.measure
    vals = np.zeros(space.n)
    vals[ball.members] = rng.standard_normal(len(ball.members))
    w = mu[ball.members]
    vals[ball.members] -= np.dot(vals[ball.members], w) / w.sum()
    norm = lebesgue_norm(vals, mu, t)
    if norm == 0:
        return vals, ball
    return vals * size_exponent(ball.mass, t) / norm, ball
