"""Empirical distance-to-measure (DTM) and its derivatives.

For a query ``x`` the data are sorted by distance to ``x`` (ties broken by
original index). With target mass ``m0 * sum(w)`` the cut index ``k`` is the
first neighbour at which the cumulative weight reaches the target; nearer
neighbours contribute their full weight and the ``k``-th neighbour carries the
leftover ``m0 * sum(w) - sum_{i<k} w_(i)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PointCloud

POINTS = "points-as-data"
WEIGHTS = "points-as-weights"

# Relative gap below which a cut or distance tie is treated as non-generic.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class DtmParams:
    m0: float
    r: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.m0 < 1.0:
            raise ValueError(f"m0 must lie in (0, 1), got {self.m0}")
        if self.r < 1.0:
            raise ValueError(f"r must be >= 1, got {self.r}")


@dataclass
class DtmField:
    """DTM values at a batch of queries with the neighbour provenance.

    ``order[q]`` lists data indices sorted by distance to query ``q``; only the
    first ``k[q] + 1`` entries (0-based cut index ``k[q]``) carry mass.
    """
    queries: np.ndarray
    values: np.ndarray
    mode: str
    m0: float
    r: float
    order: np.ndarray
    k: np.ndarray
    leftover: np.ndarray
    dist: np.ndarray
    total_mass: float
    flags: np.ndarray

    def neighbors(self, q: int) -> np.ndarray:
        return self.order[q, : self.k[q] + 1]

    def to_json(self, with_provenance: bool = False) -> dict:
        out = {"mode": self.mode, "values": self.values.tolist(), "m0": self.m0, "r": self.r}
        if with_provenance:
            out["provenance"] = [
                {"neighbors": self.neighbors(q).tolist(), "k": int(self.k[q]) + 1,
                 "leftover": float(self.leftover[q])}
                for q in range(len(self.values))
            ]
        return out


def _evaluate(points, weights, queries, params, mode, tie_tol=TIE_TOL, chunk=4096):
    points = np.asarray(points, dtype=float)
    queries = np.asarray(queries, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if queries.ndim == 1:
        queries = queries[:, None] if points.shape[1] == 1 else queries[None, :]
    if points.shape[0] == 0:
        raise ValueError("DTM needs at least one data point")
    if queries.shape[1] != points.shape[1]:
        raise ValueError(f"query dimension {queries.shape[1]} != data dimension {points.shape[1]}")
    w = np.asarray(weights, dtype=float)
    total = float(w.sum())
    if not total > 0:
        raise ValueError("total weight must be positive")
    target = params.m0 * total
    r = params.r
    nq, n = queries.shape[0], points.shape[0]
    arange = np.arange(n)

    values = np.empty(nq)
    kcut = np.empty(nq, dtype=np.int64)
    left = np.empty(nq)
    flags = np.zeros(nq, dtype=bool)
    order = np.empty((nq, n), dtype=np.int64)
    dist = np.empty((nq, n))
    for s in range(0, nq, chunk):
        qs = queries[s : s + chunk]
        d = np.sqrt(((qs[:, None, :] - points[None, :, :]) ** 2).sum(-1))
        # lexsort: primary distance, secondary index
        o = np.lexsort((np.broadcast_to(arange, d.shape), d), axis=1)
        ds = np.take_along_axis(d, o, axis=1)
        ws = w[o]
        cum = np.cumsum(ws, axis=1)
        k = np.minimum((cum < target).sum(axis=1), n - 1)
        rows = np.arange(len(qs))
        before = np.where(k > 0, cum[rows, np.maximum(k - 1, 0)], 0.0)
        lo = target - before
        dr = ds ** r
        full = np.where(arange[None, :] < k[:, None], ws * dr, 0.0).sum(axis=1)
        vr = (full + lo * dr[rows, k]) / target
        vals = np.maximum(vr, 0.0) ** (1.0 / r)

        dk = ds[rows, k]
        scale = np.maximum(ds[:, -1], 1e-300)
        nxt = np.where(k + 1 < n, ds[rows, np.minimum(k + 1, n - 1)], np.inf)
        dist_tie = np.abs(nxt - dk) <= tie_tol * scale
        cut_tie = np.abs(cum[rows, k] - target) <= tie_tol * total
        if mode == POINTS:
            prv = np.where(k > 0, ds[rows, np.maximum(k - 1, 0)], -np.inf)
            bad = dist_tie | (np.abs(dk - prv) <= tie_tol * scale) | (vals <= 0.0)
        else:
            # distance ties are harmless when weights move; only the cut moving
            # onto a farther neighbour breaks differentiability
            prv = np.where(k > 0, ds[rows, np.maximum(k - 1, 0)], dk)
            thin = (lo <= tie_tol * total) & (np.abs(dk - prv) > tie_tol * scale)
            bad = (cut_tie & ~dist_tie & (k + 1 < n)) | thin
        values[s : s + chunk] = vals
        kcut[s : s + chunk] = k
        left[s : s + chunk] = lo
        flags[s : s + chunk] = bad
        order[s : s + chunk] = o
        dist[s : s + chunk] = ds
    return DtmField(queries, values, mode, params.m0, r, order, kcut, left, dist, total, flags)


def dtm_points(data: PointCloud, queries, params: DtmParams, tie_tol: float = TIE_TOL) -> DtmField:
    """DTM of a weighted point cloud evaluated at ``queries``.

    ``tie_tol`` only controls which queries get flagged as non-differentiable.
    """
    return _evaluate(data.points, data.weights, queries, params, POINTS, tie_tol)


def dtm_weights(grid_points, weights, queries, params: DtmParams, tie_tol: float = TIE_TOL) -> DtmField:
    """DTM of fixed points ``grid_points`` carrying the (non-negative) ``weights``."""
    weights = np.asarray(weights, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    if weights.shape[0] != grid_points.shape[0]:
        raise ValueError("one weight per grid point is required")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if not weights.sum() > 0:
        raise ValueError("all-zero weight vector")
    return _evaluate(grid_points, weights, queries, params, WEIGHTS, tie_tol)


@dataclass
class DtmGradient:
    grad: np.ndarray
    flagged: bool


def points_grad_from_field(field: DtmField, q: int, points, weights) -> DtmGradient:
    """Gradient of the DTM at query ``q`` w.r.t. each data point, shape (n, d)."""
    points = np.asarray(points, dtype=float)
    grad = np.zeros_like(points)
    if field.flags[q]:
        return DtmGradient(grad, True)
    k = field.k[q]
    idx = field.order[q, : k + 1]
    eff = np.asarray(weights, dtype=float)[idx].copy()
    eff[-1] = field.leftover[q]
    y = field.queries[q]
    diff = points[idx] - y
    nrm = field.dist[q, : k + 1]
    r = field.r
    val = field.values[q]
    coef = eff * nrm ** (r - 2.0) / (val ** (r - 1.0) * field.m0 * field.total_mass)
    grad[idx] = coef[:, None] * diff
    return DtmGradient(grad, False)


def weights_grad_from_field(field: DtmField, q: int) -> DtmGradient:
    """Gradient of the DTM at query ``q`` w.r.t. every weight, shape (n,).

    The leftover mass depends on the weights of the nearer neighbours, so
    those pick up ``d_(i)^r - d_(k)^r`` and every weight picks up
    ``m0 * (d_(k)^r - dtm^r)`` through the total mass.
    """
    n = field.order.shape[1]
    grad = np.zeros(n)
    if field.flags[q]:
        return DtmGradient(grad, True)
    k = field.k[q]
    r = field.r
    val = field.values[q]
    dr = field.dist[q, : k + 1] ** r
    dkr = dr[-1]
    if val <= 0.0:
        # nearest point alone holds the target mass at distance zero: constant nearby
        return DtmGradient(grad, False)
    dsr = np.zeros(n)
    dsr[:] = field.m0 * dkr
    near = field.order[q, :k]
    dsr[near] += dr[:-1] - dkr
    grad = (dsr - field.m0 * val ** r) / (r * val ** (r - 1.0) * field.m0 * field.total_mass)
    return DtmGradient(grad, False)


def dtm_points_grad(data: PointCloud, y, params: DtmParams) -> DtmGradient:
    f = dtm_points(data, np.atleast_2d(np.asarray(y, dtype=float)), params)
    return points_grad_from_field(f, 0, data.points, data.weights)


def dtm_weights_grad(grid_points, weights, y, params: DtmParams) -> DtmGradient:
    f = dtm_weights(grid_points, weights, np.atleast_2d(np.asarray(y, dtype=float)), params)
    return weights_grad_from_field(f, 0)
