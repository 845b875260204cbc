"""Exact Hajłasz (M¹₁) norms by linear programming."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import sparse

from . import _lp
from .maxfn import sobolev_sharp
from .space import MetricMeasureSpace


@dataclass
class HajlaszCertificate:
    g: np.ndarray
    value: float
    slack: float
    dual_bound: float
    info: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "g": [float(v) for v in self.g], "slack": self.slack,
                "dual_bound": self.dual_bound}


def _pair_quotients(space: MetricMeasureSpace, f: np.ndarray):
    iu, ju = np.triu_indices(space.n, k=1)
    w = np.abs(f[iu] - f[ju]) / space.dist[iu, ju]
    return iu, ju, w


def pair_slack(space: MetricMeasureSpace, field, g) -> float:
    """``min_{x≠y} d(x,y)(g(x)+g(y)) - |u(x)-u(y)|``."""
    f = np.asarray(field, float)
    g = np.asarray(g, float)
    if space.n < 2:
        return 0.0
    iu, ju = np.triu_indices(space.n, k=1)
    return float(np.min(space.dist[iu, ju] * (g[iu] + g[ju]) - np.abs(f[iu] - f[ju])))


def hajlasz_norm_lp(space: MetricMeasureSpace, field) -> HajlaszCertificate:
    """Minimise ``Σ g μ`` subject to ``g(x)+g(y) ≥ |u(x)-u(y)|/d(x,y)`` for all pairs."""
    f = np.asarray(field, dtype=float)
    n = space.n
    mu = space.measure
    iu, ju, w = _pair_quotients(space, f)
    active = w > 0
    if not np.any(active):
        return HajlaszCertificate(np.zeros(n), 0.0, pair_slack(space, f, np.zeros(n)), 0.0)
    iu, ju, w = iu[active], ju[active], w[active]
    m = len(w)
    rows = np.r_[np.arange(m), np.arange(m)]
    A = sparse.csr_matrix((-np.ones(2 * m), (rows, np.r_[iu, ju])), shape=(m, n))
    res = _lp.minimize(mu, A, -w, np.zeros(n), np.full(n, np.inf), tag="Hajłasz norm",
                       options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    g = np.maximum(res.x, 0.0)
    viol = float(np.max(w - g[iu] - g[ju]))
    if viol > 0:
        g = g + viol / 2
    # dual: max Σ w y  s.t.  Σ_{pairs ∋ x} y ≤ μ(x), y ≥ 0
    y = np.maximum(-np.asarray(res.ineqlin.marginals), 0.0)
    load = np.zeros(n)
    np.add.at(load, iu, y)
    np.add.at(load, ju, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.min(np.where(load > 0, mu / load, np.inf))
    dual = float(np.dot(w, y) * min(1.0, scale)) if np.isfinite(scale) else 0.0
    value = float(np.dot(g, mu))
    return HajlaszCertificate(g, value, pair_slack(space, f, g), dual,
                              {"pairs": int(m), "lp_value": float(res.fun), "repair": max(viol, 0.0)})


@dataclass
class MNResult:
    value: float
    pair: tuple[int, int] | None


def mn_constant(space: MetricMeasureSpace, field, nf=None) -> MNResult:
    """``max_{x≠y} |f(x)-f(y)| / (d(x,y)(Nf(x)+Nf(y)))`` with the attaining pair."""
    f = np.asarray(field, dtype=float)
    nf = sobolev_sharp(space, f) if nf is None else np.asarray(nf, float)
    iu, ju, w = _pair_quotients(space, f)
    if not np.any(w > 0):
        return MNResult(0.0, None)
    den = nf[iu] + nf[ju]
    bad = (den == 0) & (w > 0)
    if np.any(bad):
        k = int(np.argmax(bad))
        return MNResult(float("inf"), (int(iu[k]), int(ju[k])))
    ratio = np.where(w > 0, w / np.where(den > 0, den, 1.0), 0.0)
    k = int(np.argmax(ratio))
    return MNResult(float(ratio[k]), (int(iu[k]), int(ju[k])))
