"""Seeded test-field generators."""

from __future__ import annotations

import re

import numpy as np
from scipy.sparse.csgraph import breadth_first_order

from .maxfn import discrete_convolution
from .space import MetricMeasureSpace

GENERATORS = ("linear", "bump", "random-lipschitz", "indicator-smoothed")


def linear_field(space: MetricMeasureSpace) -> np.ndarray:
    """First coordinate, or distance from point 0 when the space has no coordinates."""
    if space.coords is not None:
        return np.asarray(space.coords[:, 0], dtype=float).copy()
    return space.dist[0].copy()


def bump_field(space: MetricMeasureSpace, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    c = int(rng.integers(space.n))
    radius = max(space.diameter / 4, 2 * space.spacing)
    return np.clip(1.0 - space.dist[c] / radius, 0.0, None)


def random_lipschitz_field(space: MetricMeasureSpace, seed: int = 0) -> np.ndarray:
    """Increments ``U(-1,1)·d`` accumulated along a BFS tree of the edge graph from point 0."""
    rng = np.random.default_rng(seed)
    from scipy import sparse

    e = space.edges
    adj = sparse.coo_matrix((space.edge_lengths, (e[:, 0], e[:, 1])), shape=(space.n, space.n)).tocsr()
    order, pred = breadth_first_order(adj, 0, directed=False, return_predecessors=True)
    steps = rng.uniform(-1.0, 1.0, size=space.n)
    out = np.zeros(space.n)
    for x in order[1:]:
        p = pred[x]
        out[x] = out[p] + steps[x] * space.dist[p, x]
    return out


def indicator_smoothed_field(space: MetricMeasureSpace, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    c = int(rng.integers(space.n))
    ind = (space.dist[c] <= max(space.diameter / 4, space.spacing)).astype(float)
    u, _ = discrete_convolution(space, ind, 2 * space.spacing)
    return u


_FIELD_RE = re.compile(r"^\s*([a-z\-_]+)\s*(?:\(\s*(?:seed\s*=\s*)?(-?\d+)\s*\))?\s*$")


def make_field(space: MetricMeasureSpace, spec: str, seed: int | None = None) -> np.ndarray:
    """Build a field from ``"linear"``, ``"bump(3)"``, ``"random-lipschitz(seed=5)"`` and similar."""
    m = _FIELD_RE.match(str(spec))
    if not m:
        raise ValueError(f"cannot parse field spec {spec!r}")
    name = m.group(1).replace("_", "-")
    if m.group(2) is not None:
        seed = int(m.group(2))
    seed = 0 if seed is None else seed
    if name == "linear":
        return linear_field(space)
    if name == "bump":
        return bump_field(space, seed)
    if name == "random-lipschitz":
        return random_lipschitz_field(space, seed)
    if name == "indicator-smoothed":
        return indicator_smoothed_field(space, seed)
    raise ValueError(f"unknown field generator {name!r}; expected one of {GENERATORS}")


def default_fields(seed: int = 0) -> list[str]:
    return ["linear", f"bump({seed})", f"random-lipschitz({seed})", f"indicator-smoothed({seed})"]
