"""Maximal operators on a finite metric measure space.

All suprema run over the canonical tight balls (see ``space.BallFamily``).
For operators whose value on a degenerate one-point ball is a point
evaluation (``M``, ``M_q``, ``f⁺``) the one-point ball is included as well:
any radius below the nearest-neighbour distance gives a valid ball ``{x}``,
and without it ``Mf ≥ |f|`` and ``|f| ≤ f⁺`` fail on every discrete space.
For ``N`` and ``f★`` a one-point ball contributes exactly 0, so nothing changes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import HalfspaceIntersection

from . import _lp
from .space import MetricMeasureSpace, discrete_gradient, edge_gradient, sup_over_containing

log = logging.getLogger(__name__)

LP_MAX_N = 128
RESTART_SMALL_N = 16
SWEEP_MAX_MEMBERS = 10  # φ-polytope vertex counts stay in the hundreds up to here
ORACLE_MAX_EDGES = 12  # vertex enumeration of the Φ polytope blows up beyond this  # spaces this small get the thorough restart schedule


def _as_field(space: MetricMeasureSpace, field) -> np.ndarray:
    f = np.asarray(field, dtype=float)
    if f.shape != (space.n,):
        raise ValueError(f"field has shape {f.shape}, expected ({space.n},)")
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")
    return f


def ball_means(space: MetricMeasureSpace, values) -> np.ndarray:
    """Weighted average of ``values`` over every tight ball."""
    fam = space.balls
    v = np.asarray(values, dtype=float)
    cum = np.cumsum(v[fam.order] * space.measure[fam.order], axis=1)
    return cum[fam.centers, fam.sizes - 1] / fam.masses


def hl_maximal(space: MetricMeasureSpace, field) -> np.ndarray:
    """Non-centred Hardy–Littlewood maximal function ``Mf``."""
    a = np.abs(_as_field(space, field))
    return np.maximum(sup_over_containing(space, ball_means(space, a), floor=0.0), a)


def hl_maximal_q(space: MetricMeasureSpace, field, r: float) -> np.ndarray:
    """``M_r f = (M |f|^r)^{1/r}``."""
    if not r > 0:
        raise ValueError(f"exponent r must be positive, got {r!r}")
    a = np.abs(_as_field(space, field))
    if r == 1:
        return hl_maximal(space, a)
    return hl_maximal(space, a ** r) ** (1.0 / r)


def oscillation_per_ball(space: MetricMeasureSpace, field) -> np.ndarray:
    """``(1/r(B)) ⨍_B |f - f_B|`` for every tight ball."""
    f = _as_field(space, field)
    fam = space.balls
    mu = space.measure
    out = np.empty(len(fam))
    for c in range(space.n):
        sl = fam.center_slice(c)
        ms = fam.sizes_by_center[c]
        if not len(ms):
            continue
        o = fam.order[c]
        fo, wo = f[o], mu[o]
        mass = fam.cum_mass[c, ms - 1]
        mean = np.cumsum(fo * wo)[ms - 1] / mass
        inside = np.arange(space.n)[None, :] < ms[:, None]
        dev = (np.abs(fo[None, :] - mean[:, None]) * wo[None, :] * inside).sum(axis=1)
        out[sl] = dev / mass / fam.radii[sl]
    return out


def sobolev_sharp(space: MetricMeasureSpace, field) -> np.ndarray:
    """Sobolev sharp maximal function ``Nf``."""
    return sup_over_containing(space, oscillation_per_ball(space, field), floor=0.0)


def calderon_star(space: MetricMeasureSpace, field) -> np.ndarray:
    """``f★(x) = sup_{B∋x} (1/r(B)) ⨍_B |f(y) - f(x)| dμ(y)``."""
    f = _as_field(space, field)
    fam = space.balls
    mu = space.measure
    n = space.n
    out = np.zeros(n)
    for c in range(n):
        ms = fam.sizes_by_center[c]
        if not len(ms):
            continue
        o = fam.order[c]
        fo, wo = f[o], mu[o]
        # rows: point x in sorted order, columns: prefix sums over members
        cum = np.cumsum(np.abs(fo[None, :] - fo[:, None]) * wo[None, :], axis=1)
        radii = fam.sorted_dist[c, ms - 1]
        vals = cum[:, ms - 1] / fam.cum_mass[c, ms - 1] / radii
        first = fam.first_ball_covering_rank(c)
        vals[np.arange(len(ms))[None, :] < first[:, None]] = -np.inf
        best = vals.max(axis=1) if vals.shape[1] else np.full(n, -np.inf)
        out[o] = np.maximum(out[o], best)
    return out


# --------------------------------------------------------------------------
# grand maximal function
# --------------------------------------------------------------------------

@dataclass
class BallPolytope:
    """Scaled test-function class of a ball: ψ = φ/μ(B) with |φ| ≤ u, |φ_i - φ_j| ≤ d/r."""

    members: np.ndarray
    u: np.ndarray
    A: sparse.csr_matrix
    rhs: np.ndarray
    mass: float
    radius: float


def ball_polytope(space: MetricMeasureSpace, b: int) -> BallPolytope:
    fam = space.balls
    mask = fam.membership(b)
    members = np.nonzero(mask)[0]
    r = float(fam.radii[b])
    e, L = space.edges, space.edge_lengths
    u = np.ones(space.n)
    out0 = mask[e[:, 0]] & ~mask[e[:, 1]]
    out1 = ~mask[e[:, 0]] & mask[e[:, 1]]
    np.minimum.at(u, e[out0, 0], L[out0] / r)
    np.minimum.at(u, e[out1, 1], L[out1] / r)
    inner = mask[e[:, 0]] & mask[e[:, 1]]
    local = np.full(space.n, -1)
    local[members] = np.arange(len(members))
    ie = local[e[inner]]
    k = len(ie)
    A = sparse.csr_matrix((np.r_[np.ones(k), -np.ones(k)],
                           (np.r_[np.arange(k), np.arange(k)], np.r_[ie[:, 0], ie[:, 1]])),
                          shape=(k, len(members)))
    return BallPolytope(members, np.minimum(u[members], 1.0), A, L[inner] / r, float(fam.masses[b]), r)


class BallLP:
    """Scaled test class ``φ = μ(B)ψ`` of one tight ball at a time, as a single warm-started model.

    Variables are all n points; points outside the ball are pinned to 0, so the
    edge rows ``|φ_i - φ_j| ≤ d/r`` also encode the boundary bounds.
    """

    def __init__(self, space: MetricMeasureSpace):
        self.space = space
        e = space.edges
        m = len(e)
        A = sparse.csr_matrix((np.r_[np.ones(m), -np.ones(m)], (np.r_[np.arange(m), np.arange(m)], np.r_[e[:, 0], e[:, 1]])),
                              shape=(m, space.n))
        self.L = space.edge_lengths
        self.model = _lp.PersistentLP(A, -self.L, self.L, np.zeros(space.n), np.zeros(space.n))
        self.current: int | None = None

    def select(self, b: int) -> None:
        if self.current == b:
            return
        fam = self.space.balls
        box = fam.membership(b).astype(float)
        r = fam.radii[b]
        self.model.set_row_bounds(-self.L / r, self.L / r)
        self.model.set_col_bounds(-box, box)
        self.current = b

    def maximize(self, b: int, coef, tag: str = "") -> tuple[float, np.ndarray]:
        self.select(b)
        self.model.set_cost(coef)
        return self.model.solve(tag or f"ball {b}")


def grand_ball_lp(space: MetricMeasureSpace, field, b: int, lp: BallLP | None = None) -> float:
    """Exact ``max |∫ f ψ dμ|`` over the discretised test class of tight ball ``b``."""
    f = np.asarray(field, dtype=float)
    lp = lp or BallLP(space)
    val, _ = lp.maximize(b, f * space.measure / space.balls.masses[b])
    return abs(val)


def grand_ball_tent(space: MetricMeasureSpace, field) -> np.ndarray:
    """Per-ball ``|∫ f ψ_B|`` with the tent ``ψ_B = max(0, 1 - d(·,c)/r)/μ(B)``."""
    f = np.asarray(field, dtype=float)
    fam = space.balls
    tent = np.clip(1.0 - space.dist[fam.centers] / fam.radii[:, None], 0.0, None)
    return np.abs(tent @ (f * space.measure)) / fam.masses


def _geodesic_box(space: MetricMeasureSpace, b: int) -> np.ndarray:
    """Upper bound on |φ| per point from the Lipschitz chain to the ball complement."""
    fam = space.balls
    mask = fam.membership(b)
    u = np.zeros(space.n)
    if mask.all():
        u[:] = 1.0
        return u
    gd = space.graph_dist[np.ix_(mask, ~mask)].min(axis=1)
    u[mask] = np.minimum(1.0, gd / fam.radii[b])
    return u


def _grand_upper(space: MetricMeasureSpace, f: np.ndarray) -> np.ndarray:
    """Per-ball bounds on the LP value: min of the box bound and a cancellation bound.

    Box: ``|φ| ≤ 1`` on B.  Cancellation: ``∫fφ = φ(c)∫f + ∫f(φ - φ(c))`` with
    ``|φ(y) - φ(c)| ≤ min(2, gd(y, c)/r)`` for a weighted graph median ``c`` of ``|f|``.
    """
    fam = space.balls
    w = np.abs(f) * space.measure
    box = np.empty(len(fam))
    for c in range(space.n):
        sl = fam.center_slice(c)
        cum = np.cumsum(w[fam.order[c]])
        box[sl] = cum[fam.sizes[sl] - 1]
    support = np.nonzero(w)[0]
    if not len(support):
        return np.zeros(len(fam))
    gd = space.graph_dist[:, support]
    c = int(np.argmin(gd @ w[support]))
    spread = np.minimum(2.0, gd[c][None, :] / fam.radii[:, None]) @ w[support]
    cancel = abs(float(np.dot(f, space.measure))) + spread
    return np.minimum(box, cancel) / fam.masses


def grand_maximal(space: MetricMeasureSpace, field, mode: str | None = None) -> np.ndarray:
    """Grand maximal function ``f⁺`` in ``tent`` or ``exact_lp`` mode.

    ``exact_lp`` solves one LP per tight ball, skipping balls whose a-priori
    upper bound cannot raise the running value at any of their members.
    """
    f = _as_field(space, field)
    if mode is None:
        mode = "exact_lp" if space.n <= LP_MAX_N else "tent"
    if mode in ("lp", "exact"):
        mode = "exact_lp"
    if mode == "tent":
        return _grand_tent_lower(space, f)
    if mode != "exact_lp":
        raise ValueError(f"unknown grand maximal mode {mode!r}")
    return grand_maximal_bounds(space, f)[0]


def _grand_tent_lower(space: MetricMeasureSpace, f: np.ndarray) -> np.ndarray:
    return np.maximum(sup_over_containing(space, grand_ball_tent(space, f), floor=0.0), np.abs(f))


def grand_maximal_bounds(space: MetricMeasureSpace, field, max_solves: int | None = None):
    """Certified bracket ``lower ≤ f⁺ ≤ upper`` of the exact-LP grand maximal function.

    Balls are visited by decreasing upper bound; at most ``max_solves`` LPs are solved
    (unlimited by default, in which case ``lower == upper``).  Returns
    ``(lower, upper, {"solved", "balls"})``.
    """
    f = _as_field(space, field)
    fam = space.balls
    lb = _grand_tent_lower(space, f)
    ub = _grand_upper(space, f)
    wabs = np.abs(f) * space.measure
    pending = np.zeros(len(fam))
    solved = 0
    floor = lb.min()
    lp = BallLP(space)
    order = np.argsort(-ub, kind="stable")
    for pos, b in enumerate(order):
        if ub[b] <= floor:
            break
        mem = fam.order[fam.centers[b], : fam.sizes[b]]
        target = lb[mem].min() * (1 + 1e-12)
        if ub[b] <= target:
            continue
        refined = np.dot(wabs, _geodesic_box(space, b)) / fam.masses[b]
        if refined <= target:
            continue
        if max_solves is not None and solved >= max_solves:
            rest = order[pos:]
            pending[rest] = ub[rest]
            pending[b] = min(ub[b], refined)
            break
        val = grand_ball_lp(space, f, int(b), lp)
        solved += 1
        lb[mem] = np.maximum(lb[mem], val)
        floor = lb.min()
    log.debug("grand_maximal: solved %d of %d ball LPs", solved, len(fam))
    upper = np.maximum(lb, sup_over_containing(space, pending, floor=0.0))
    return lb, upper, {"solved": solved, "balls": len(fam)}


# --------------------------------------------------------------------------
# gradient maximal function (∇f)⁺
# --------------------------------------------------------------------------

def _divergence_matrix(space: MetricMeasureSpace) -> sparse.csr_matrix:
    """``D`` with ``(D Φ)(x) = μ(x) div Φ(x) = Σ_{y~x} Φ(x,y)/d(x,y)``."""
    e, L = space.edges, space.edge_lengths
    m = len(e)
    return sparse.csr_matrix((np.r_[1 / L, -1 / L], (np.r_[e[:, 0], e[:, 1]], np.r_[np.arange(m), np.arange(m)])),
                             shape=(space.n, m))


def divergence(space: MetricMeasureSpace, edge_field) -> np.ndarray:
    """Negative adjoint of the edge difference quotient under (ν≡1, μ)."""
    return (_divergence_matrix(space) @ np.asarray(edge_field, float)) / space.measure


@dataclass
class GradPlusBall:
    value: float
    certified: bool
    rounds: int


class GradPlusSolver:
    """Alternating-LP evaluator of the per-ball bilinear program for one field."""

    def __init__(self, space: MetricMeasureSpace, field, max_rounds: int = 50,
                 patience: int | None = None, max_starts: int | None = None, seed: int = 0):
        self.space = space
        self.f = np.asarray(field, dtype=float)
        self.a = edge_gradient(space, self.f)
        self.max_rounds = max_rounds
        small = space.n <= RESTART_SMALL_N
        self.patience = patience if patience is not None else (30 if small else 3)
        self.max_starts = max_starts if max_starts is not None else (120 if small else 12)
        self.seed = seed
        m = len(space.edges)
        self.phi_lp = BallLP(space)
        D = _divergence_matrix(space)
        self.Phi_lp = _lp.PersistentLP(D, -space.measure, space.measure, -np.ones(m), np.ones(m))
        self.touch = np.zeros(space.n)
        e = space.edges
        np.add.at(self.touch, e[:, 0], np.abs(self.a))
        np.add.at(self.touch, e[:, 1], np.abs(self.a))
        self._radius = None

    def _phi_coef(self, Phi, mass):
        e = self.space.edges
        per_point = np.zeros(self.space.n)
        w = self.a * Phi / 2
        np.add.at(per_point, e[:, 0], w)
        np.add.at(per_point, e[:, 1], w)
        return per_point / mass

    def _Phi_coef(self, phi, mass):
        e = self.space.edges
        return self.a * (phi[e[:, 0]] + phi[e[:, 1]]) / 2 / mass

    def _climb(self, b: int, phi, mass: float) -> tuple[float, bool, int]:
        prev, val = -np.inf, 0.0
        for rnd in range(1, self.max_rounds + 1):
            cPhi = self._Phi_coef(phi, mass)
            if not np.any(cPhi):
                return 0.0, True, rnd
            self.Phi_lp.set_cost(cPhi)
            _, Phi = self.Phi_lp.solve(f"ball {b} Φ-step")
            val, phi = self.phi_lp.maximize(b, self._phi_coef(Phi, mass), tag=f"ball {b} φ-step")
            if val - prev <= 1e-12 * max(1.0, abs(val)):
                return val, True, rnd
            prev = val
        return val, False, self.max_rounds

    def _sweep(self, b: int, mass: float, best: float) -> float:
        """One Φ-step from every vertex of the φ polytope: the exact bilinear max.

        Vertices are visited by decreasing ℓ¹ bound on the Φ-step value and the sweep stops
        once that bound cannot beat ``best``.
        """
        poly = ball_polytope(self.space, b)
        V = np.zeros((0, self.space.n))
        if len(poly.members):
            local = _phi_vertices(poly)
            V = np.zeros((len(local), self.space.n))
            V[:, poly.members] = local
        e = self.space.edges
        C = self.a * (V[:, e[:, 0]] + V[:, e[:, 1]]) / 2 / mass
        bound = np.abs(C).sum(axis=1)
        for v in np.argsort(-bound, kind="stable"):
            if bound[v] <= best * (1 + 1e-12):
                break
            self.Phi_lp.set_cost(C[v])
            val, _ = self.Phi_lp.solve(f"ball {b} vertex sweep")
            best = max(best, abs(val))
        return best

    def ball(self, b: int, upper: float = np.inf) -> GradPlusBall:
        """Best stationary value over the deterministic starts plus seeded random vertex restarts.

        On small spaces, balls with few members are finished by a vertex sweep instead.
        Restarts stop after ``patience`` consecutive non-improving starts, at ``max_starts``,
        or once the value reaches ``upper``.
        """
        space, fam = self.space, self.space.balls
        if not np.any(self.a):
            return GradPlusBall(0.0, True, 0)
        r, mass = float(fam.radii[b]), float(fam.masses[b])
        if self._radius != r:
            self.Phi_lp.set_row_bounds(-space.measure / r, space.measure / r)
            self._radius = r
        mask = fam.membership(b)
        mu = space.measure
        fB = np.dot(self.f[mask], mu[mask]) / mass
        starts = [np.clip(1.0 - space.dist[fam.centers[b]] / r, 0.0, None) * mask]
        for w in (self.touch * mask, (self.f - fB) * mu * mask):
            if np.any(w):
                starts.append(self.phi_lp.maximize(b, w, tag=f"ball {b} start")[1])
        best, certified, rounds_used = 0.0, True, 0
        for phi in starts:
            val, ok, rnd = self._climb(b, phi, mass)
            best, certified, rounds_used = max(best, abs(val)), certified and ok, max(rounds_used, rnd)
        if space.n <= RESTART_SMALL_N and fam.sizes[b] <= SWEEP_MAX_MEMBERS:
            return GradPlusBall(max(best, self._sweep(b, mass, best)), certified, rounds_used)
        rng = np.random.default_rng([self.seed, b])
        stale = 0
        for _ in range(self.max_starts):
            if stale >= self.patience or best >= upper * (1 - 1e-12):
                break
            phi = self.phi_lp.maximize(b, rng.standard_normal(space.n) * mask, tag=f"ball {b} restart")[1]
            val, ok, rnd = self._climb(b, phi, mass)
            certified, rounds_used = certified and ok, max(rounds_used, rnd)
            if abs(val) > best * (1 + 1e-9):
                best, stale = abs(val), 0
            else:
                stale += 1
        return GradPlusBall(best, certified, rounds_used)


def grad_plus_ball(space: MetricMeasureSpace, field, b: int, max_rounds: int = 50) -> GradPlusBall:
    """Bilinear max for one ball by alternating LPs from several starts."""
    f = _as_field(space, field)
    return GradPlusSolver(space, f, max_rounds).ball(b, _grad_plus_upper(space, f, edge_gradient(space, f), b))


def _vertices(halfspaces: np.ndarray, dim: int) -> np.ndarray:
    """Vertices of {x: A x <= b} containing 0 in its interior (rows ``[A, -b]``)."""
    if dim == 1:
        A, bb = halfspaces[:, 0], -halfspaces[:, 1]
        return np.array([[np.min(bb[A > 0] / A[A > 0])], [np.max(bb[A < 0] / A[A < 0])]])
    hs = HalfspaceIntersection(halfspaces, np.zeros(dim))
    return hs.intersections


def _phi_vertices(poly: BallPolytope) -> np.ndarray:
    """Vertices of the φ polytope of a ball, in member coordinates."""
    k = len(poly.members)
    rows = [np.c_[np.eye(k), -poly.u], np.c_[-np.eye(k), -poly.u]]
    Ad = poly.A.toarray()
    if len(Ad):
        rows += [np.c_[Ad, -poly.rhs], np.c_[-Ad, -poly.rhs]]
    return _vertices(np.vstack(rows), k)


def grad_plus_ball_oracle(space: MetricMeasureSpace, field, b: int) -> float:
    """Brute force over vertex pairs of the two polytopes (small balls only)."""
    f = np.asarray(field, dtype=float)
    if len(space.edges) > ORACLE_MAX_EDGES:
        raise ValueError(f"oracle limited to {ORACLE_MAX_EDGES} edges, space has {len(space.edges)}")
    poly = ball_polytope(space, b)
    a = edge_gradient(space, f)
    D = _divergence_matrix(space)
    k, m = len(poly.members), len(space.edges)
    VP = _phi_vertices(poly)
    # Φ polytope
    Dd = D.toarray()
    rhs = space.measure / poly.radius
    VQ = _vertices(np.vstack([np.c_[np.eye(m), -np.ones(m)], np.c_[-np.eye(m), -np.ones(m)],
                              np.c_[Dd, -rhs], np.c_[-Dd, -rhs]]), m)
    # bilinear form: value = Σ_e a_e Φ_e (φ_i + φ_j)/2 / μ(B)
    S = np.zeros((k, m))
    local = np.full(space.n, -1)
    local[poly.members] = np.arange(k)
    for col, (i, j) in enumerate(space.edges):
        for p in (i, j):
            if local[p] >= 0:
                S[local[p], col] += a[col] / 2
    vals = VP @ (S / poly.mass) @ VQ.T
    return float(np.abs(vals).max())


def _grad_plus_upper(space, f, a, b) -> float:
    fam = space.balls
    mask = fam.membership(b)
    r, mass = fam.radii[b], fam.masses[b]
    u = _geodesic_box(space, b)
    e = space.edges
    touching = mask[e[:, 0]] | mask[e[:, 1]]
    deg = np.zeros(space.n)
    np.add.at(deg, e[touching, 0], 1.0)
    np.add.at(deg, e[touching, 1], 1.0)
    w = (u * space.measure + deg / 2) / (r * mass)
    order = np.argsort(f, kind="stable")
    cw = np.cumsum(w[order])
    med = f[order][np.searchsorted(cw, cw[-1] / 2)]
    bound1 = float(np.dot(np.abs(f - med), w))
    ue = (u[e[:, 0]] + u[e[:, 1]]) / 2
    bound2 = float(np.dot(np.abs(a) * touching, ue) / mass)
    return min(bound1, bound2)


def grad_plus(space: MetricMeasureSpace, field, return_details: bool = False):
    """``(∇f)⁺`` via alternating LPs per tight ball, with upper-bound pruning."""
    f = _as_field(space, field)
    fam = space.balls
    a = edge_gradient(space, f)
    out = np.zeros(space.n)
    certified = True
    if not np.any(a):
        return (out, {"certified": True, "solved": 0}) if return_details else out
    ub = np.array([_grad_plus_upper(space, f, a, b) for b in range(len(fam))])
    solved = 0
    solver = GradPlusSolver(space, f)
    for b in np.argsort(-ub, kind="stable"):
        if ub[b] <= out.min():
            break
        mem = fam.order[fam.centers[b], : fam.sizes[b]]
        if ub[b] <= out[mem].min() * (1 + 1e-12):
            continue
        res = solver.ball(int(b), ub[b])
        solved += 1
        certified &= res.certified
        out[mem] = np.maximum(out[mem], res.value)
    if return_details:
        return out, {"certified": certified, "solved": solved, "balls": len(fam)}
    return out


# --------------------------------------------------------------------------
# discrete convolution and M★(∇f)
# --------------------------------------------------------------------------

@dataclass
class ConvolutionCover:
    radius: float
    centers: np.ndarray
    overlap: int  # max number of dilated balls 6B_j containing a point
    weights: np.ndarray  # partition of unity, shape (len(centers), n)


def separated_centers(space: MetricMeasureSpace, r: float) -> np.ndarray:
    """Greedy maximal r-separated set in ascending id order."""
    chosen: list[int] = []
    for x in range(space.n):
        if not chosen or np.all(space.dist[x, chosen] > r):
            chosen.append(x)
    return np.array(chosen)


def discrete_convolution(space: MetricMeasureSpace, field, r: float):
    """``u_r = Σ_j φ_j u_{3B_j}`` over a greedy cover by balls of radius r.

    ``φ_j`` normalises plateau tents that equal 1 on ``3B_j`` and vanish
    outside ``6B_j``.  Returns ``(u_r, ConvolutionCover)``.
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    f = _as_field(space, field)
    centers = separated_centers(space, r)
    d = space.dist[centers]
    tents = np.clip(2.0 - d / (3 * r), 0.0, 1.0)
    weights = tents / tents.sum(axis=0)
    mu = space.measure
    near = d <= 3 * r
    # averaging f - f(0) keeps constants exact (Σφ_j = 1 only up to rounding)
    ref = f[0]
    avg = (near * ((f - ref) * mu)).sum(axis=1) / (near * mu).sum(axis=1)
    overlap = int((d <= 6 * r).sum(axis=0).max())
    return ref + weights.T @ avg, ConvolutionCover(float(r), centers, overlap, weights)


def grad_maximal_star(space: MetricMeasureSpace, field, radii) -> np.ndarray:
    """``M★(∇f) = max_j |∇ u_{r_j}|``."""
    radii = list(radii)
    if not radii:
        raise ValueError("radii must be nonempty")
    out = np.zeros(space.n)
    for r in radii:
        u, _ = discrete_convolution(space, field, r)
        out = np.maximum(out, discrete_gradient(space, u))
    return out
