"""Sampled persistence landscapes and their weighted average.

Each sampled entry remembers which pair produced it and on which side of the
tent it sits, which is all the backward pass needs: the derivative of a tent
value is -1 w.r.t. the birth on the ascending side and +1 w.r.t. the death on
the descending side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .persistence import PersistenceDiagram

ZERO, ASCENDING, DESCENDING = 0, 1, 2


@dataclass(frozen=True)
class LandscapeParams:
    k_max: int
    t_min: float
    t_max: float
    m: int

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.m < 2:
            raise ValueError("need at least two sample points")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")

    @property
    def resolution(self) -> float:
        return (self.t_max - self.t_min) / (self.m - 1)

    @property
    def ts(self) -> np.ndarray:
        return self.t_min + np.arange(self.m) * self.resolution


@dataclass
class LandscapeMatrix:
    values: np.ndarray        # (k_max, m)
    pair: np.ndarray          # (k_max, m) index into the diagram, -1 for zero entries
    branch: np.ndarray        # (k_max, m) ZERO / ASCENDING / DESCENDING
    ts: np.ndarray
    n_pairs: int              # length of the diagram the indices refer to
    near_kink: np.ndarray     # (m,) bool, sample within tolerance of a kink or order swap

    @property
    def k_max(self):
        return self.values.shape[0]

    def to_csv(self) -> str:
        head = "t," + ",".join(f"k{i + 1}" for i in range(self.k_max))
        rows = [head]
        for l, t in enumerate(self.ts):
            rows.append(",".join(format(float(v), ".17g") for v in [t, *self.values[:, l]]))
        return "\n".join(rows) + "\n"


def landscape(d: PersistenceDiagram, p: LandscapeParams, dim=None, cap_inf: bool = False,
              kink_tol: float = 0.0) -> LandscapeMatrix:
    """Sample the first ``k_max`` landscapes of ``d`` (restricted to ``dim``) on ``p.ts``.

    Infinite deaths are dropped, or replaced by ``t_max`` when ``cap_inf``.
    """
    ts = p.ts
    mask = np.ones(len(d), dtype=bool) if dim is None else d.dims == dim
    births = d.births.astype(float)
    deaths = d.deaths.astype(float)
    if cap_inf:
        deaths = np.where(np.isinf(deaths), max(p.t_max, 0.0), deaths)
        mask &= deaths > births
    else:
        mask &= np.isfinite(deaths)
    idx = np.flatnonzero(mask)
    k_max, m = p.k_max, p.m
    values = np.zeros((k_max, m))
    pair = np.full((k_max, m), -1, dtype=np.int64)
    branch = np.zeros((k_max, m), dtype=np.int8)
    near = np.zeros(m, dtype=bool)
    if idx.size:
        b, dd = births[idx][:, None], deaths[idx][:, None]
        up, down = ts[None, :] - b, dd - ts[None, :]
        tent = np.maximum(0.0, np.minimum(up, down))
        # stable sort on -tent keeps the lower pair index first on ties
        order = np.argsort(-tent, axis=0, kind="stable")
        top = order[:k_max]
        kk = top.shape[0]
        vals = np.take_along_axis(tent, top, axis=0)
        values[:kk] = vals
        nz = vals > 0
        asc = np.take_along_axis(up, top, axis=0) <= np.take_along_axis(down, top, axis=0)
        pair[:kk] = np.where(nz, idx[top], -1)
        branch[:kk] = np.where(nz, np.where(asc, ASCENDING, DESCENDING), ZERO)
        if kink_tol > 0:
            srt = np.take_along_axis(tent, order, axis=0)
            kth = srt[kk - 1] if kk == k_max else np.zeros(m)
            reach = tent + kink_tol >= kth[None, :]
            on_kink = (np.abs(up) <= kink_tol) | (np.abs(down) <= kink_tol) | (np.abs(up - down) <= kink_tol)
            near_col = np.any(on_kink & reach, axis=0)
            lim = min(k_max + 1, srt.shape[0])
            if lim > 1:
                gaps = srt[: lim - 1] - srt[1:lim]
                near_col |= np.any((gaps <= kink_tol) & (srt[: lim - 1] > kink_tol), axis=0)
            near = near_col
    return LandscapeMatrix(values, pair, branch, ts, len(d), near)


def check_simplex(omega, tol: float = 1e-9) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or abs(omega.sum() - 1.0) > tol:
        raise ValueError("weights must be positive and sum to one")
    return omega


def weighted_landscape(lm: LandscapeMatrix, omega) -> np.ndarray:
    """Sampled weighted average ``sum_k omega_k lambda_k(t_l)``."""
    omega = check_simplex(omega)
    if omega.shape[0] != lm.k_max:
        raise ValueError("need one weight per landscape")
    return omega @ lm.values


def landscape_jacobian(lm: LandscapeMatrix, omega):
    """Jacobians of the weighted landscape w.r.t. births and deaths.

    Returns ``(jb, jd)`` of shape (m, n_pairs).
    """
    omega = np.asarray(omega, dtype=float)
    m = lm.values.shape[1]
    jb = np.zeros((m, lm.n_pairs))
    jd = np.zeros((m, lm.n_pairs))
    cols = np.broadcast_to(np.arange(m), lm.pair.shape)
    w = np.broadcast_to(omega[:, None], lm.pair.shape)
    a = lm.branch == ASCENDING
    np.add.at(jb, (cols[a], lm.pair[a]), -w[a])
    dsc = lm.branch == DESCENDING
    np.add.at(jd, (cols[dsc], lm.pair[dsc]), w[dsc])
    return jb, jd


def landscape_grad(lm: LandscapeMatrix, omega, l: int):
    """Per-pair derivative of the weighted landscape at sample ``l``: ``(d/db_i, d/dd_i)``."""
    jb, jd = landscape_jacobian(lm, omega)
    return jb[l], jd[l]
