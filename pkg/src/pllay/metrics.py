"""Exact diagram distances (bottleneck, q-Wasserstein) and point-set distances.

Diagrams are matched after the usual diagonal augmentation: each side is
padded with the diagonal projections of the other side's points, so that a
point may be matched to the diagonal at cost half its persistence and
diagonal-to-diagonal matches are free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from .data import PointCloud
from .persistence import PersistenceDiagram


@dataclass
class Matching:
    """Bijection between the augmented diagrams.

    ``pairs`` holds ``(i, j)`` with ``i < n1`` a point of the first diagram
    (else a diagonal slot) and ``j < n2`` a point of the second one.
    """
    pairs: list
    cost: float
    n1: int
    n2: int


def _as_points(d) -> np.ndarray:
    if isinstance(d, PersistenceDiagram):
        return d.pairs(finite=False)
    arr = np.asarray(d, dtype=float)
    return arr.reshape(-1, 2)


def _split(d):
    p = _as_points(d)
    fin = np.isfinite(p[:, 1])
    return p[fin], p[~fin, 0]


def _augmented_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n1+n2) x (n2+n1) L-infinity cost matrix with the diagonal padding."""
    n1, n2 = len(a), len(b)
    big = np.inf
    c = np.zeros((n1 + n2, n2 + n1))
    if n1 and n2:
        c[:n1, :n2] = np.abs(a[:, None, :] - b[None, :, :]).max(-1)
    half_a = (a[:, 1] - a[:, 0]) / 2.0
    half_b = (b[:, 1] - b[:, 0]) / 2.0
    ca = np.full((n1, n1), big)
    np.fill_diagonal(ca, half_a)
    cb = np.full((n2, n2), big)
    np.fill_diagonal(cb, half_b)
    c[:n1, n2:] = ca
    c[n1:, :n2] = cb
    return c


def _essential_cost(ea, eb, q=None) -> float:
    if len(ea) != len(eb):
        return np.inf
    if not len(ea):
        return 0.0
    diff = np.abs(np.sort(ea) - np.sort(eb))
    return float(diff.max()) if q is None else float((diff ** q).sum())


def _feasible(c: np.ndarray, eps: float):
    adj = csr_matrix(c <= eps)
    match = maximum_bipartite_matching(adj, perm_type="column")
    return bool(np.all(match >= 0)), match


def bottleneck(d1, d2, matching: bool = False):
    """Exact bottleneck distance; with ``matching=True`` also the optimal :class:`Matching`."""
    a, ea = _split(d1)
    b, eb = _split(d2)
    ess = _essential_cost(ea, eb)
    n1, n2 = len(a), len(b)
    if n1 + n2 == 0:
        dist, pairs = 0.0, []
    else:
        c = _augmented_costs(a, b)
        cand = np.unique(np.concatenate([[0.0], c[np.isfinite(c)].ravel()]))
        lo, hi = 0, len(cand) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if _feasible(c, cand[mid])[0]:
                hi = mid
            else:
                lo = mid + 1
        dist = float(cand[lo])
        _, match = _feasible(c, dist)
        pairs = [(int(i), int(j)) for i, j in enumerate(match)]
    dist = max(dist, ess)
    if matching:
        return dist, Matching(pairs, dist, n1, n2)
    return dist


def wasserstein(d1, d2, q: float = 1.0) -> float:
    """Exact q-Wasserstein distance with L-infinity ground metric."""
    if q < 1:
        raise ValueError("q must be >= 1")
    a, ea = _split(d1)
    b, eb = _split(d2)
    ess = _essential_cost(ea, eb, q)
    if not np.isfinite(ess):
        return np.inf
    if len(a) + len(b) == 0:
        return float(ess ** (1.0 / q))
    c = _augmented_costs(a, b)
    finite = np.isfinite(c)
    cq = np.where(finite, c, 0.0) ** q
    cq[~finite] = cq[finite].max() * 4 + 1.0 if finite.any() else 1.0
    rows, cols = linear_sum_assignment(cq)
    total = float(cq[rows, cols].sum()) + ess
    return total ** (1.0 / q)


def hausdorff(a, b) -> float:
    """Hausdorff distance between two finite point sets (Euclidean)."""
    pa = a.points if isinstance(a, PointCloud) else np.atleast_2d(np.asarray(a, dtype=float))
    pb = b.points if isinstance(b, PointCloud) else np.atleast_2d(np.asarray(b, dtype=float))
    if pa.size == 0 or pb.size == 0:
        raise ValueError("Hausdorff distance of an empty set")
    if pa.shape[1] != pb.shape[1]:
        raise ValueError("point sets live in different dimensions")
    dm = cdist(pa, pb)
    return float(max(dm.min(axis=1).max(), dm.min(axis=0).max()))


def w2_empirical(a, b) -> float:
    """W2 between two uniform empirical measures of equal size (optimal assignment)."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=float)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=float)
    if pa.ndim == 1:
        pa, pb = pa[:, None], np.asarray(pb, dtype=float).reshape(-1, 1)
    if len(pa) != len(pb):
        raise ValueError("w2_empirical needs clouds of equal size")
    c = cdist(pa, pb, "sqeuclidean")
    rows, cols = linear_sum_assignment(c)
    return float(np.sqrt(c[rows, cols].mean()))


def brute_force_matching_costs(d1, d2):
    """All partial matchings of two small finite diagrams, as arrays of L-inf costs.

    Yields one cost vector per matching: matched pairs contribute their
    L-infinity distance, unmatched points half their persistence.
    """
    a, _ = _split(d1)
    b, _ = _split(d2)
    ha = (a[:, 1] - a[:, 0]) / 2.0
    hb = (b[:, 1] - b[:, 0]) / 2.0
    n1, n2 = len(a), len(b)

    def rec(i, used, acc):
        if i == n1:
            yield acc + [hb[j] for j in range(n2) if j not in used]
            return
        yield from rec(i + 1, used, acc + [ha[i]])
        for j in range(n2):
            if j not in used:
                yield from rec(i + 1, used | {j}, acc + [float(np.abs(a[i] - b[j]).max())])

    for costs in rec(0, frozenset(), []):
        yield np.array(costs, dtype=float)


def bottleneck_brute(d1, d2) -> float:
    return min((c.max() if c.size else 0.0) for c in brute_force_matching_costs(d1, d2))


def wasserstein_brute(d1, d2, q: float = 1.0) -> float:
    return min(float((c ** q).sum()) for c in brute_force_matching_costs(d1, d2)) ** (1.0 / q)
