"""Calderón–Zygmund decompositions at height α for three level functions."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .maxfn import calderon_star, grand_maximal, hl_maximal_q, sobolev_sharp
from .space import MetricMeasureSpace, discrete_gradient, doubling_profile
from .whitney import PartitionOfUnity, WhitneyCover, WhitneyError, partition_of_unity, whitney_cover

FLAVORS = ("homogeneous", "tilde", "m11")
_ALIASES = {"homog": "homogeneous", "homogeneous": "homogeneous", "tilde": "tilde", "m11": "m11"}


class CZError(ValueError):
    pass


def flavor_tag(flavor: str) -> str:
    try:
        return _ALIASES[flavor]
    except KeyError:
        raise CZError(f"unknown CZ flavor {flavor!r}; expected one of {FLAVORS}") from None


def admissible_q(space: MetricMeasureSpace) -> tuple[float, float]:
    s = doubling_profile(space).s
    return s / (s + 1), 1.0


def default_q(space: MetricMeasureSpace) -> float:
    lo, hi = admissible_q(space)
    return (lo + hi) / 2


def check_q(space: MetricMeasureSpace, q: float) -> float:
    lo, hi = admissible_q(space)
    if not lo < q < hi:
        raise CZError(f"q = {q} outside the admissible interval ({lo:.6g}, 1) for this space")
    return float(q)


@dataclass
class LevelData:
    """Level integrand and its ``M_q`` for one field, reusable across heights."""

    flavor: str
    q: float
    integrand: np.ndarray
    level: np.ndarray
    nf: np.ndarray
    star: np.ndarray | None = None
    grand_mode: str | None = None


def level_data(space: MetricMeasureSpace, field, q: float, flavor: str, grand_mode: str | None = None,
               nf=None) -> LevelData:
    flavor = flavor_tag(flavor)
    check_q(space, q)
    f = np.asarray(field, dtype=float)
    nf = sobolev_sharp(space, f) if nf is None else np.asarray(nf, float)
    star = None
    if flavor == "homogeneous":
        integrand = nf
    elif flavor == "tilde":
        if grand_mode is None:
            grand_mode = "exact_lp" if space.n <= 128 else "tent"
        integrand = grand_maximal(space, f, grand_mode) + nf
    else:
        star = calderon_star(space, f)
        integrand = np.abs(f) + star
    return LevelData(flavor, q, integrand, hl_maximal_q(space, integrand, q), nf, star, grand_mode)


def level_set(space: MetricMeasureSpace, field, q: float, alpha: float, flavor: str, data: LevelData | None = None):
    if not alpha > 0:
        raise CZError("alpha must be positive")
    data = data or level_data(space, field, q, flavor)
    return np.nonzero(data.level > alpha)[0]


@dataclass
class CZDecomposition:
    flavor: str
    alpha: float
    q: float
    field: np.ndarray
    omega: np.ndarray
    cover: WhitneyCover | None
    pu: PartitionOfUnity | None
    c: np.ndarray
    b: np.ndarray  # shape (len(cover), n)
    g: np.ndarray
    data: LevelData
    selected: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, int))  # m11 points x_i

    def to_dict(self) -> dict:
        out = {"flavor": self.flavor, "alpha": self.alpha, "q": self.q,
               "omega": [int(x) for x in self.omega],
               "cover": self.cover.to_dict() if self.cover is not None else None,
               "c": [float(v) for v in self.c],
               "b": [{str(int(k)): float(v[k]) for k in np.nonzero(v)[0]} for v in self.b],
               "g": [float(v) for v in self.g]}
        if self.flavor == "m11":
            out["x"] = [int(v) for v in self.selected]
        return out


def cz_decompose(space: MetricMeasureSpace, field, q: float, alpha: float, flavor: str,
                 data: LevelData | None = None) -> CZDecomposition:
    """Split ``f = g + Σ b_i`` with ``b_i = (f - c_i) χ_i`` on the Whitney cover of ``{level > α}``."""
    flavor = flavor_tag(flavor)
    f = np.asarray(field, dtype=float)
    if data is None:
        data = level_data(space, f, q, flavor)
    omega = level_set(space, f, q, alpha, flavor, data)
    n = space.n
    if len(omega) == n:
        raise CZError(f"complement empty: level set at alpha={alpha:g} is the whole space")
    if not len(omega):
        return CZDecomposition(flavor, float(alpha), q, f, omega, None, None, np.zeros(0), np.zeros((0, n)), f.copy(), data)
    cover = whitney_cover(space, omega)
    pu = partition_of_unity(space, cover)
    mu = space.measure
    selected = np.zeros(0, int)
    if flavor == "m11":
        selected = np.array([_select_point(space, f, data.star, alpha, c, r, i, data.q)
                             for i, (c, r) in enumerate(zip(cover.centers, cover.radii))], dtype=int)
        c = f[selected]
    else:
        c = (pu.chi @ (f * mu)) / (pu.chi @ mu)
    b = (f[None, :] - c[:, None]) * pu.chi
    g = f - b.sum(axis=0)
    return CZDecomposition(flavor, float(alpha), q, f, omega, cover, pu, c, b, g, data, selected)


def _select_point(space, f, star, alpha, center, radius, i, q) -> int:
    """``argmin f★`` over ``2B_i`` subject to ``|f| ≤ 2α``, ties by id."""
    cand = np.nonzero((space.dist[center] <= 2 * radius) & (np.abs(f) <= 2 * alpha))[0]
    if not len(cand):
        inner = space.dist[center] <= 2 * radius
        share = float(space.measure[inner & (np.abs(f) <= 2 * alpha)].sum() / space.measure[inner].sum())
        raise CZError(f"no admissible point for ball {i}: good-set share {share:.3g} "
                      f"vs required margin {1 - 2 ** (-q):.3g}")
    return int(cand[np.argmin(star[cand])])


def c_q(q: float) -> float:
    return (1 - 2 ** (-q)) ** (-1 / q) * (1 + 1e-6)


def _qnorm(values, mu, q) -> float:
    return float(np.dot(np.abs(values) ** q, mu) ** (1 / q))


@dataclass
class CZReport:
    C_g: float
    C_b1: float
    C_bq: float
    C_B: float
    K: int
    residual: float
    support_ok: bool
    extra: dict

    def to_dict(self) -> dict:
        return {"C_g": self.C_g, "C_b1": self.C_b1, "C_bq": self.C_bq, "C_B": self.C_B, "K": self.K,
                "residual": self.residual, "support_ok": self.support_ok, **self.extra}


def verify_cz(space: MetricMeasureSpace, dec: CZDecomposition, nf=None) -> CZReport:
    """Measure the constants in the CZ bounds for one decomposition."""
    f, g, a, q = dec.field, dec.g, dec.alpha, dec.q
    mu = space.measure
    nf = dec.data.nf if nf is None else np.asarray(nf, float)
    grad_g = discrete_gradient(space, g)
    if dec.flavor == "homogeneous":
        C_g = float(grad_g.max() / a)
    else:
        C_g = float((np.abs(g) + grad_g).max() / a)
    residual = float(np.abs(f - g - dec.b.sum(axis=0)).max())
    extra: dict = {"omega_size": int(len(dec.omega)), "pieces": int(len(dec.b))}
    if dec.cover is None:
        return CZReport(C_g, 0.0, 0.0, 0.0, 0, residual, True, extra)
    cov = dec.cover
    support_ok = True
    C_b1 = C_bq = 0.0
    total_mass = 0.0
    for i, (ball, r) in enumerate(zip(cov.covering, cov.radii)):
        bi = dec.b[i]
        outside = np.ones(space.n, bool)
        outside[ball.members] = False
        if np.any(bi[outside] != 0):
            support_ok = False
        total_mass += ball.mass
        C_b1 = max(C_b1, float(np.dot(np.abs(bi), mu) / (a * ball.mass * r)))
        gb = discrete_gradient(space, bi)
        vals = gb if dec.flavor == "homogeneous" else np.abs(bi) + gb
        C_bq = max(C_bq, _qnorm(vals, mu, q) / (a * ball.mass ** (1 / q)))
    C_B = float(a * total_mass / np.dot(dec.data.integrand, mu))
    if dec.flavor == "m11":
        extra["max_abs_c_over_alpha"] = float(np.abs(dec.c).max() / a)
        extra["max_star_over_alpha"] = float(dec.data.star[dec.selected].max() / a)
        extra["c_q"] = c_q(q)
    extra["pnq_dilation"] = pnq_dilation(space, dec, nf)
    return CZReport(C_g, C_b1, C_bq, C_B, cov.overlap, residual, support_ok, extra)


def pnq_dilation(space: MetricMeasureSpace, dec: CZDecomposition, nf, lams=(1, 4, 7)) -> dict:
    """Worst ratio ``(1/r)⨍_B|f-f_B| / (⨍_{λB} (Nf)^q)^{1/q}`` over covering balls, per λ."""
    f, q, mu = dec.field, dec.q, space.measure
    out = {}
    for lam in lams:
        worst = 0.0
        for ball in dec.cover.covering:
            mem = ball.members
            w = mu[mem]
            osc = np.dot(np.abs(f[mem] - np.dot(f[mem], w) / w.sum()), w) / w.sum() / ball.radius
            big = space.dist[ball.center] <= lam * ball.radius
            den = (np.dot(nf[big] ** q, mu[big]) / mu[big].sum()) ** (1 / q)
            if osc > 0:
                worst = max(worst, float(osc / den) if den > 0 else float("inf"))
        out[str(lam)] = worst
    return out


__all__ = ["CZDecomposition", "CZError", "CZReport", "FLAVORS", "LevelData", "WhitneyError", "admissible_q",
           "c_q", "check_q", "cz_decompose", "default_q", "level_data", "level_set", "verify_cz"]
