"""Finite metric measure spaces, balls, averages and discrete gradients.

A space is a finite point set ``0..n-1`` with a distance table, a positive
point measure and an edge graph used for gradients.  Everything downstream
(maximal functions, covers, decompositions) is built on the canonical family
of *tight* balls: for each center ``c`` and each distinct positive distance
``r`` from ``c``, the closed ball ``B(c, r)``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree, shortest_path
from scipy.spatial.distance import cdist

REL_TOL = 1e-12


class SpaceValidationError(ValueError):
    """Raised when a space violates the metric/measure/connectivity axioms."""


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    members: np.ndarray  # sorted point ids
    mass: float

    def __contains__(self, x) -> bool:
        i = np.searchsorted(self.members, x)
        return bool(i < len(self.members) and self.members[i] == x)

    def indicator(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.members] = True
        return out

    def to_dict(self) -> dict:
        return {"center": int(self.center), "radius": float(self.radius),
                "members": [int(m) for m in self.members], "mass": float(self.mass)}


@dataclass(frozen=True)
class DoublingProfile:
    c_d: float
    s: float
    witness: tuple[int, float] | None = None  # (center, radius) attaining c_d


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Immutable finite metric measure space.

    ``edges`` holds unordered pairs ``(i, j)`` with ``i < j``.  ``coords`` is
    optional and only used by field generators.
    """

    dist: np.ndarray
    measure: np.ndarray
    edges: np.ndarray
    coords: np.ndarray | None = None
    name: str = "space"

    def __post_init__(self):
        dist = np.ascontiguousarray(self.dist, dtype=float)
        measure = np.ascontiguousarray(self.measure, dtype=float)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        for arr in (dist, measure, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "measure", measure)
        object.__setattr__(self, "edges", edges)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)
        validate_space(self)

    @property
    def n(self) -> int:
        return len(self.measure)

    @property
    def total_mass(self) -> float:
        return float(self.measure.sum())

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        if not len(self.edges):
            return np.zeros(0)
        return self.dist[self.edges[:, 0], self.edges[:, 1]]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def spacing(self) -> float:
        """Mean nearest-neighbour distance; the natural length unit of the space."""
        if self.n < 2:
            return 1.0
        d = self.dist + np.diag(np.full(self.n, np.inf))
        return float(d.min(axis=1).mean())

    @cached_property
    def graph_dist(self) -> np.ndarray:
        """Shortest-path distances along edges weighted by their lengths."""
        n = self.n
        if not len(self.edges):
            return np.where(np.eye(n, dtype=bool), 0.0, np.inf)
        w = csr_matrix((self.edge_lengths, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n))
        return shortest_path(w, directed=False)

    @cached_property
    def balls(self) -> "BallFamily":
        return BallFamily(self)

    def fingerprint(self) -> dict:
        return {"name": self.name, "n": self.n, "edges": int(len(self.edges)),
                "total_mass": self.total_mass}


def validate_space(space: MetricMeasureSpace) -> None:
    d, mu, e = space.dist, space.measure, space.edges
    n = len(mu)
    if d.shape != (n, n):
        raise SpaceValidationError(f"distance table has shape {d.shape}, expected ({n}, {n})")
    if not np.all(np.isfinite(d)):
        raise SpaceValidationError("distance table contains non-finite entries")
    bad = np.nonzero(~(mu > 0) | ~np.isfinite(mu))[0]
    if len(bad):
        raise SpaceValidationError(f"nonpositive weight at point {int(bad[0])}: {mu[bad[0]]!r}")
    if n == 0:
        raise SpaceValidationError("space has no points")
    scale = max(float(np.abs(d).max()), 1.0)
    asym = np.argwhere(np.abs(d - d.T) > REL_TOL * scale)
    if len(asym):
        i, j = asym[0]
        raise SpaceValidationError(f"metric not symmetric at ({i}, {j}): {d[i, j]!r} vs {d[j, i]!r}")
    if np.any(np.diag(d) != 0):
        i = int(np.nonzero(np.diag(d) != 0)[0][0])
        raise SpaceValidationError(f"nonzero self-distance at point {i}")
    off = d + np.eye(n)
    zero = np.argwhere(off <= 0)
    if len(zero):
        i, j = zero[0]
        raise SpaceValidationError(f"nonpositive distance between distinct points ({i}, {j})")
    for k in range(n):
        viol = d - (d[:, [k]] + d[[k], :])
        if viol.max() > REL_TOL * scale:
            i, j = np.unravel_index(int(np.argmax(viol)), viol.shape)
            raise SpaceValidationError(
                f"triangle inequality violated on triple ({i}, {k}, {j}): "
                f"d({i},{j})={d[i, j]!r} > d({i},{k})+d({k},{j})={d[i, k] + d[k, j]!r}")
    if len(e):
        if e.min() < 0 or e.max() >= n:
            raise SpaceValidationError("edge refers to a point outside 0..n-1")
        loops = e[e[:, 0] == e[:, 1]]
        if len(loops):
            raise SpaceValidationError(f"self-loop edge at point {int(loops[0, 0])}")
    if n > 1:
        adj = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)) if len(e) else csr_matrix((n, n))
        k, labels = connected_components(adj, directed=False)
        if k > 1:
            stray = int(np.nonzero(labels != labels[0])[0][0])
            raise SpaceValidationError(f"edge graph disconnected ({k} components); point {stray} unreachable from 0")


class BallFamily:
    """The canonical tight balls of a space, grouped by center.

    Balls are indexed center-major, radius ascending.  For center ``c`` the
    members of the ball with ``m`` members are ``order[c, :m]``.
    """

    def __init__(self, space: MetricMeasureSpace):
        n = space.n
        self.n = n
        self.order = np.argsort(space.dist, axis=1, kind="stable")
        self.sorted_dist = np.take_along_axis(space.dist, self.order, axis=1)
        self.rank = np.empty_like(self.order)
        rows = np.arange(n)[:, None]
        self.rank[rows, self.order] = np.arange(n)[None, :]
        mu_sorted = space.measure[self.order]
        self.cum_mass = np.cumsum(mu_sorted, axis=1)

        sizes, offsets = [], [0]
        for c in range(n):
            sd = self.sorted_dist[c]
            m = np.arange(2, n + 1)
            last = np.r_[sd[2:] > sd[1:-1], True] if n > 1 else np.zeros(0, bool)
            sizes.append(m[last])
            offsets.append(offsets[-1] + int(last.sum()))
        self.sizes_by_center = sizes
        self.offsets = np.array(offsets)
        self.centers = np.repeat(np.arange(n), [len(s) for s in sizes])
        self.sizes = np.concatenate(sizes) if sizes else np.zeros(0, int)
        idx = self.sizes - 1
        self.radii = self.sorted_dist[self.centers, idx]
        self.masses = self.cum_mass[self.centers, idx]

    def __len__(self) -> int:
        return len(self.sizes)

    def members(self, b: int) -> np.ndarray:
        return np.sort(self.order[self.centers[b], : self.sizes[b]])

    def ball(self, b: int) -> Ball:
        return Ball(int(self.centers[b]), float(self.radii[b]), self.members(b), float(self.masses[b]))

    def center_slice(self, c: int) -> slice:
        return slice(self.offsets[c], self.offsets[c + 1])

    def membership(self, b: int) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[self.order[self.centers[b], : self.sizes[b]]] = True
        return out

    def containing(self, x: int) -> np.ndarray:
        """Indices of balls that contain point ``x``."""
        r = self.rank[self.centers, x]
        return np.nonzero(self.sizes > r)[0]

    def first_ball_covering_rank(self, c: int) -> np.ndarray:
        """For center ``c``: per rank p, index (within the center) of the first ball containing rank p."""
        return np.searchsorted(self.sizes_by_center[c], np.arange(self.n), side="right")


def sup_over_containing(space: MetricMeasureSpace, per_ball: np.ndarray, floor: float = -np.inf) -> np.ndarray:
    """Pointwise ``max`` of a per-ball value over the tight balls containing each point."""
    fam = space.balls
    out = np.full(space.n, floor, dtype=float)
    for c in range(space.n):
        vals = per_ball[fam.center_slice(c)]
        if not len(vals):
            continue
        suffix = np.maximum.accumulate(vals[::-1])[::-1]
        suffix = np.r_[suffix, -np.inf]
        k = fam.first_ball_covering_rank(c)
        o = fam.order[c]
        out[o] = np.maximum(out[o], suffix[k])
    return out


# --------------------------------------------------------------------------
# generators and file formats
# --------------------------------------------------------------------------

def path_space(n: int, spacing: float = 1.0) -> MetricMeasureSpace:
    x = np.arange(n, dtype=float) * spacing
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return MetricMeasureSpace(np.abs(x[:, None] - x[None, :]), np.ones(n), edges,
                              coords=x[:, None], name=f"path({n},{spacing:g})")


def cycle_space(n: int) -> MetricMeasureSpace:
    k = np.arange(n)
    gap = np.abs(k[:, None] - k[None, :])
    step = 2 * math.pi / n
    dist = np.minimum(gap, n - gap) * step
    edges = np.column_stack([k, (k + 1) % n]) if n > 2 else np.array([[0, 1]])[: n - 1]
    theta = k * step
    return MetricMeasureSpace(dist, np.ones(n), edges, coords=np.column_stack([np.cos(theta), np.sin(theta)]),
                              name=f"cycle({n})")


def grid_space(k: int) -> MetricMeasureSpace:
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    pts = np.column_stack([ii.ravel(), jj.ravel()]).astype(float)
    dist = cdist(pts, pts, metric="cityblock")
    idx = np.arange(k * k).reshape(k, k)
    edges = np.vstack([np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()]),
                       np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])])
    return MetricMeasureSpace(dist, np.ones(k * k), edges, coords=pts, name=f"grid({k}x{k})")


def cloud_space(n: int, seed: int = 0) -> MetricMeasureSpace:
    """Seeded uniform points in the unit square, Euclidean metric.

    Edges: the ε-graph with ε = 2 × expected nearest-neighbour spacing
    (``1/(2√n)``), joined with the Euclidean minimum spanning tree so the
    graph is connected.
    """
    pts = np.random.default_rng(seed).random((n, 2))
    dist = cdist(pts, pts)
    eps = 1.0 / math.sqrt(n)
    close = np.argwhere(np.triu(dist <= eps, k=1))
    mst = minimum_spanning_tree(csr_matrix(np.triu(dist, k=1))).tocoo()
    edges = np.vstack([close, np.column_stack([mst.row, mst.col])])
    return MetricMeasureSpace(dist, np.ones(n), edges, coords=pts, name=f"cloud({n},seed={seed})")


_SPEC_RE = re.compile(r"^\s*(path|cycle|grid|cloud)\s*\(([^)]*)\)\s*$")


def build_space(spec) -> MetricMeasureSpace:
    """Build a space from a descriptor.

    Accepts ``"path(4,1.0)"``, ``"cycle(8)"``, ``"grid(4)"`` / ``"grid(4x4)"``,
    ``"cloud(64,seed=7)"``, an equivalent dict (``{"kind": "cloud", "n": 64,
    "seed": 7}``), or a path to a space JSON file.
    """
    if isinstance(spec, MetricMeasureSpace):
        return spec
    if isinstance(spec, dict):
        kind = spec["kind"]
        if kind == "path":
            return path_space(int(spec["n"]), float(spec.get("spacing", 1.0)))
        if kind == "cycle":
            return cycle_space(int(spec["n"]))
        if kind == "grid":
            return grid_space(int(spec.get("k", spec.get("n"))))
        if kind == "cloud":
            return cloud_space(int(spec["n"]), int(spec.get("seed", 0)))
        if kind == "file":
            return load_space(spec["path"])
        raise ValueError(f"unknown space kind {kind!r}")
    spec = str(spec)
    m = _SPEC_RE.match(spec)
    if m is None:
        if Path(spec).exists():
            return load_space(spec)
        raise ValueError(f"cannot parse space descriptor {spec!r}")
    kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
    kw = {}
    pos = []
    for a in args:
        if "=" in a:
            k, v = a.split("=", 1)
            kw[k.strip()] = v.strip()
        else:
            pos.append(a)
    if kind == "path":
        return path_space(int(pos[0]), float(pos[1]) if len(pos) > 1 else float(kw.get("spacing", 1.0)))
    if kind == "cycle":
        return cycle_space(int(pos[0]))
    if kind == "grid":
        return grid_space(int(pos[0].lower().split("x")[0]))
    seed = int(pos[1]) if len(pos) > 1 else int(kw.get("seed", 0))
    return cloud_space(int(pos[0]), seed)


def space_to_json(space: MetricMeasureSpace) -> dict:
    out = {"n": space.n, "measure": space.measure.tolist(), "edges": space.edges.tolist()}
    if space.coords is not None and space.name.startswith("cloud"):
        out.update(metric="euclidean", coords=space.coords.tolist())
    else:
        out.update(metric="matrix", distances=space.dist.tolist())
    return out


def space_from_json(obj: dict, name: str = "file") -> MetricMeasureSpace:
    n = int(obj["n"])
    if obj["metric"] == "matrix":
        dist = np.asarray(obj["distances"], dtype=float)
        coords = None
    elif obj["metric"] == "euclidean":
        coords = np.asarray(obj["coords"], dtype=float)
        dist = cdist(coords, coords)
    else:
        raise SpaceValidationError(f"unknown metric kind {obj['metric']!r}")
    measure = np.asarray(obj.get("measure", np.ones(n)), dtype=float)
    if len(measure) != n:
        raise SpaceValidationError(f"measure has {len(measure)} entries, expected {n}")
    return MetricMeasureSpace(dist, measure, np.asarray(obj["edges"], dtype=np.int64), coords=coords, name=name)


def load_space(path) -> MetricMeasureSpace:
    with open(path, encoding="utf-8") as fh:
        return space_from_json(json.load(fh), name=Path(path).stem)


def save_space(space: MetricMeasureSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(space_to_json(space), fh)


def read_field(path, n: int | None = None) -> np.ndarray:
    """Read an ``id,value`` CSV; ids must be exactly ``0..n-1``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ids = data[:, 0].astype(int)
    if n is None:
        n = len(ids)
    if sorted(ids.tolist()) != list(range(n)):
        raise ValueError(f"field file {path} does not list ids 0..{n - 1} exactly once")
    out = np.empty(n)
    out[ids] = data[:, 1]
    if not np.all(np.isfinite(out)):
        raise ValueError(f"field file {path} contains non-finite values")
    return out


def write_field(path, values) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,value\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def enumerate_balls(space: MetricMeasureSpace) -> list[Ball]:
    fam = space.balls
    return [fam.ball(b) for b in range(len(fam))]


def make_ball(space: MetricMeasureSpace, center: int, radius: float) -> Ball:
    """Closed ball with a prescribed (not necessarily tight) radius."""
    members = np.nonzero(space.dist[center] <= radius)[0]
    return Ball(int(center), float(radius), members, float(space.measure[members].sum()))


def ball_average(space: MetricMeasureSpace, field, ball: Ball) -> float:
    f = np.asarray(field, dtype=float)
    w = space.measure[ball.members]
    return float(np.dot(f[ball.members], w) / w.sum())


def doubling_profile(space: MetricMeasureSpace) -> DoublingProfile:
    """Sup of μ(B(x,2r))/μ(B(x,r)) over all centers and radii.

    Both masses are right-continuous step functions of r with jumps at the
    distances d(x,y) and their halves, so evaluating at those points is exact.
    """
    fam = space.balls
    best, witness = 1.0, None
    for x in range(space.n):
        sd = fam.sorted_dist[x]
        cm = fam.cum_mass[x]
        crit = np.unique(np.r_[sd[1:], sd[1:] / 2])
        inner = cm[np.searchsorted(sd, crit, side="right") - 1]
        outer = cm[np.searchsorted(sd, 2 * crit, side="right") - 1]
        ratio = outer / inner
        if len(ratio) and ratio.max() > best:
            k = int(np.argmax(ratio))
            best, witness = float(ratio[k]), (x, float(crit[k]))
    return DoublingProfile(best, math.log2(best), witness)


def edge_gradient(space: MetricMeasureSpace, field) -> np.ndarray:
    """Oriented difference quotients ``(f(j) - f(i)) / d(i, j)`` per edge ``(i, j)``."""
    f = np.asarray(field, dtype=float)
    e = space.edges
    return (f[e[:, 1]] - f[e[:, 0]]) / space.edge_lengths


def discrete_gradient(space: MetricMeasureSpace, field) -> np.ndarray:
    slopes = np.abs(edge_gradient(space, field))
    out = np.zeros(space.n)
    np.maximum.at(out, space.edges[:, 0], slopes)
    np.maximum.at(out, space.edges[:, 1], slopes)
    return out


def poincare_constant(space: MetricMeasureSpace, q: float, field, with_witness: bool = False):
    """Smallest C with (⨍|f-f_B|^q)^{1/q} ≤ C r (⨍|∇f|^q)^{1/q} over all tight balls.

    Returns ``inf`` when some ball has oscillation but no gradient; with
    ``with_witness`` the attaining ball is returned alongside.
    """
    if q < 1:
        raise ValueError("Poincaré exponent q must be >= 1")
    f = np.asarray(field, dtype=float)
    grad = discrete_gradient(space, f)
    fam = space.balls
    mu = space.measure
    best, witness = 0.0, None
    scale = max(np.abs(f).max(), 1.0)
    for b in range(len(fam)):
        mem = fam.order[fam.centers[b], : fam.sizes[b]]
        w = mu[mem]
        mass = w.sum()
        fb = np.dot(f[mem], w) / mass
        lhs = (np.dot(np.abs(f[mem] - fb) ** q, w) / mass) ** (1 / q)
        rhs = fam.radii[b] * (np.dot(grad[mem] ** q, w) / mass) ** (1 / q)
        if rhs == 0:
            if lhs > REL_TOL * scale:
                best, witness = math.inf, b
                break
            continue
        if lhs / rhs > best:
            best, witness = lhs / rhs, b
    if with_witness:
        return best, (fam.ball(witness) if witness is not None else None)
    return best
