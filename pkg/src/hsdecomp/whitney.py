"""Whitney covers of open sets and the subordinate tent partition of unity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import Ball, MetricMeasureSpace, discrete_gradient, make_ball

C1 = 4.0


class WhitneyError(ValueError):
    pass


@dataclass
class WhitneyCover:
    omega: np.ndarray  # sorted ids
    complement: np.ndarray
    centers: np.ndarray
    dist_to_f: np.ndarray  # d(x_i, F) per center
    underlying: list[Ball]
    covering: list[Ball]
    radii: np.ndarray
    overlap: int
    c1: float = C1

    def __len__(self) -> int:
        return len(self.centers)

    def to_dict(self) -> dict:
        return {"c1": self.c1, "centers": [int(c) for c in self.centers],
                "radii": [float(r) for r in self.radii], "K": int(self.overlap)}


@dataclass
class PartitionOfUnity:
    chi: np.ndarray  # shape (len(cover), n)
    lipschitz: np.ndarray  # r_i * max |∇χ_i|

    @property
    def c_pu(self) -> float:
        return float(self.lipschitz.max()) if len(self.lipschitz) else 0.0


def _as_ids(space: MetricMeasureSpace, omega) -> np.ndarray:
    arr = np.asarray(omega)
    if arr.dtype == bool:
        if arr.shape != (space.n,):
            raise ValueError("boolean omega mask has the wrong length")
        return np.nonzero(arr)[0]
    ids = np.unique(arr.astype(int))
    if len(ids) and (ids[0] < 0 or ids[-1] >= space.n):
        raise ValueError("omega contains ids outside 0..n-1")
    return ids


def whitney_cover(space: MetricMeasureSpace, omega) -> WhitneyCover:
    """Greedy Whitney cover of ``omega`` with dilation ``C1 = 4``.

    Candidates are scanned by decreasing distance to the complement (ties by
    id); a candidate becomes a center when its underlying ball of radius
    ``d(x,F)/8`` shares no point with previously accepted underlying balls.
    """
    ids = _as_ids(space, omega)
    n = space.n
    mask = np.zeros(n, dtype=bool)
    mask[ids] = True
    comp = np.nonzero(~mask)[0]
    if len(ids) and not len(comp):
        raise WhitneyError("complement empty: omega is the whole space")
    if not len(ids):
        return WhitneyCover(ids, comp, np.zeros(0, int), np.zeros(0), [], [], np.zeros(0), 0)
    dF = space.dist[np.ix_(ids, comp)].min(axis=1)
    order = np.lexsort((ids, -dF))
    taken = np.zeros(n, dtype=bool)
    centers, dists, under = [], [], []
    for k in order:
        x, d = int(ids[k]), float(dF[k])
        ball = make_ball(space, x, d / (2 * C1))
        if taken[ball.members].any():
            continue
        taken[ball.members] = True
        centers.append(x)
        dists.append(d)
        under.append(ball)
    dists = np.array(dists)
    radii = dists / 2
    covering = [make_ball(space, c, r) for c, r in zip(centers, radii)]
    count = np.zeros(n, dtype=int)
    for b in covering:
        count[b.members] += 1
    if not np.all(count[ids] > 0):
        raise WhitneyError("internal error: Whitney balls do not cover omega")
    return WhitneyCover(ids, comp, np.array(centers, dtype=int), dists, under, covering, radii, int(count.max()))


def partition_of_unity(space: MetricMeasureSpace, cover: WhitneyCover) -> PartitionOfUnity:
    """``χ_i = ψ_i / Σ_j ψ_j`` with tents ``ψ_i = (1 - d(·,x_i)/r_i)_+``."""
    if not len(cover):
        raise WhitneyError("partition of unity needs a nonempty cover")
    d = space.dist[cover.centers]
    psi = np.clip(1.0 - d / cover.radii[:, None], 0.0, None)
    total = psi.sum(axis=0)
    in_omega = np.zeros(space.n, dtype=bool)
    in_omega[cover.omega] = True
    if np.any(total[in_omega] <= 0):
        bad = int(np.nonzero(in_omega & (total <= 0))[0][0])
        raise WhitneyError(f"internal error: tents vanish at point {bad} of omega")
    chi = np.where(in_omega, psi / np.where(total > 0, total, 1.0), 0.0)
    lip = np.array([r * discrete_gradient(space, c).max() for r, c in zip(cover.radii, chi)])
    return PartitionOfUnity(chi, lip)


def cover_diagnostics(space: MetricMeasureSpace, cover: WhitneyCover) -> dict:
    """Structural checks: disjointness, coverage, 2B_i ∩ F ≠ ∅, comparable radii."""
    n = space.n
    used = np.zeros(n, dtype=int)
    for b in cover.underlying:
        used[b.members] += 1
    covered = np.zeros(n, dtype=bool)
    for b in cover.covering:
        covered[b.members] = True
    reaches_f = [bool(np.any(space.dist[c, cover.complement] <= 2 * r)) for c, r in zip(cover.centers, cover.radii)]
    ratio = 1.0
    for x in cover.omega:
        idx = [i for i, b in enumerate(cover.covering) if x in b]
        if idx:
            rr = cover.radii[idx]
            ratio = max(ratio, float(rr.max() / rr.min()))
    return {"disjoint": bool(used.max(initial=0) <= 1), "covers": bool(covered[cover.omega].all()),
            "reaches_f": bool(all(reaches_f)), "radius_ratio": ratio, "K": cover.overlap}
