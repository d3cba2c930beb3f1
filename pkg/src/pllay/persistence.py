"""Persistence diagrams by GF(2) column reduction, with the simplex pairing."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import reduction
from .complexes import FilteredComplex

INF = float("inf")


@dataclass
class PersistenceDiagram:
    """Birth/death pairs of H0 and H1.

    ``pairing[i]`` holds the sorted-order positions of the birth and death
    cells of pair ``i`` (death position ``-1`` for essential classes).
    """
    births: np.ndarray
    deaths: np.ndarray
    dims: np.ndarray
    pairing: np.ndarray | None = None
    complex: FilteredComplex | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.births)

    @classmethod
    def from_pairs(cls, pairs, dim=None) -> "PersistenceDiagram":
        """Build from ``(b, d)`` or ``(b, d, dim)`` tuples."""
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))
        arr = [tuple(p) for p in pairs]
        b = np.array([p[0] for p in arr], dtype=float)
        d = np.array([p[1] for p in arr], dtype=float)
        if dim is not None:
            dm = np.full(len(arr), dim, dtype=np.int64)
        else:
            dm = np.array([p[2] if len(p) > 2 else 0 for p in arr], dtype=np.int64)
        if np.any(d <= b):
            raise ValueError("every pair needs death > birth")
        return cls(b, d, dm)

    def pairs(self, dim=None, finite=False) -> np.ndarray:
        """(n, 2) array of the pairs in ``dim`` (all dims when ``None``)."""
        return self.points(dim, finite)[0]

    def points(self, dim=None, finite=False):
        mask = np.ones(len(self), dtype=bool)
        if dim is not None:
            mask &= self.dims == dim
        if finite:
            mask &= np.isfinite(self.deaths)
        idx = np.flatnonzero(mask)
        return np.column_stack([self.births[idx], self.deaths[idx]]), idx

    def restrict(self, dim=None, finite=True) -> "PersistenceDiagram":
        _, idx = self.points(dim, finite)
        pairing = None if self.pairing is None else self.pairing[idx]
        return PersistenceDiagram(self.births[idx], self.deaths[idx], self.dims[idx], pairing, self.complex)

    def to_json(self) -> dict:
        out = {"pairs": [{"b": float(b), "d": float(d) if np.isfinite(d) else "inf", "dim": int(k)}
                         for b, d, k in zip(self.births, self.deaths, self.dims)]}
        if self.pairing is not None and self.complex is not None:
            ids = self.complex.ids
            out["pairing"] = [[int(ids[bp]), int(ids[dp]) if dp >= 0 else None] for bp, dp in self.pairing]
        return out

    @classmethod
    def from_json(cls, obj) -> "PersistenceDiagram":
        if isinstance(obj, str):
            obj = json.loads(obj)
        prs = obj.get("pairs", [])
        b = np.array([float(p["b"]) for p in prs])
        d = np.array([INF if p["d"] == "inf" else float(p["d"]) for p in prs])
        k = np.array([int(p.get("dim", 0)) for p in prs], dtype=np.int64)
        return cls(b.reshape(-1), d.reshape(-1), k.reshape(-1))


def compute_persistence(k: FilteredComplex, keep_pairing: bool = True, backend=None) -> PersistenceDiagram:
    """H0/H1 diagram of a filtered complex; zero-persistence pairs are dropped."""
    if len(k) == 0:
        return PersistenceDiagram(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64),
                                  np.zeros((0, 2), dtype=np.int64) if keep_pairing else None, k)
    _check_monotone(k)
    reduce = backend or reduction.reduce_boundary
    low = np.asarray(reduce(k.indptr, k.indices, k.dims))
    deaths_pos = np.flatnonzero(low >= 0)
    births_pos = low[deaths_pos]
    b = k.values[births_pos]
    d = k.values[deaths_pos]
    keep = d > b
    births_pos, deaths_pos = births_pos[keep], deaths_pos[keep]

    paired = np.zeros(len(k), dtype=bool)
    paired[low[low >= 0]] = True
    paired[low >= 0] = True
    ess = np.flatnonzero(~paired)
    ess = ess[k.dims[ess] <= 1]
    fin = k.dims[births_pos] <= 1

    bpos = np.concatenate([births_pos[fin], ess])
    dpos = np.concatenate([deaths_pos[fin], np.full(len(ess), -1, dtype=np.int64)])
    dims = k.dims[bpos]
    births = k.values[bpos]
    deaths = np.where(dpos >= 0, k.values[np.maximum(dpos, 0)], INF)
    order = np.lexsort((bpos, dims))
    pairing = np.column_stack([bpos, dpos])[order] if keep_pairing else None
    return PersistenceDiagram(births[order], deaths[order], dims[order].astype(np.int64), pairing, k)


def _check_monotone(k: FilteredComplex) -> None:
    counts = np.diff(k.indptr)
    if counts.sum() == 0:
        return
    cols = np.repeat(np.arange(len(k)), counts)
    if np.any(k.indices >= cols) or np.any(k.values[k.indices] > k.values[cols]):
        raise ValueError("complex is not in a valid filtration order")


# --- brute-force oracle -------------------------------------------------------

def _rank_gf2(vectors) -> int:
    """Rank over GF(2) of vectors given as Python int bitmasks."""
    basis = {}
    for v in vectors:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                break
    return len(basis)


def _cycle_basis(cols):
    """Kernel basis (as bitmasks over the columns) of the GF(2) map given by ``cols``."""
    basis = {}
    kernel = []
    for j, v in enumerate(cols):
        comb = 1 << j
        while v:
            top = v.bit_length() - 1
            if top in basis:
                bv, bc = basis[top]
                v ^= bv
                comb ^= bc
            else:
                basis[top] = (v, comb)
                break
        if not v:
            kernel.append(comb)
    return kernel


def persistent_betti(k: FilteredComplex, a: float, b: float, dim: int) -> int:
    """Rank of H_dim(K_a) -> H_dim(K_b) by direct linear algebra on chains.

    Computed as dim(Z(K_a) + B(K_b)) - dim B(K_b); independent of
    the reduction used by :func:`compute_persistence`.
    """
    if a > b:
        raise ValueError("need a <= b")
    cells_p = np.flatnonzero((k.dims == dim) & (k.values <= a)).tolist()
    cofaces = np.flatnonzero((k.dims == dim + 1) & (k.values <= b)).tolist()
    index_p = {p: i for i, p in enumerate(np.flatnonzero(k.dims == dim).tolist())}

    def as_mask(pos, index):
        m = 0
        for f in k.boundary(pos).tolist():
            m ^= 1 << index[f]
        return m

    if dim == 0:
        z_vectors = [1 << index_p[p] for p in cells_p]
    else:
        index_low = {p: i for i, p in enumerate(np.flatnonzero(k.dims == dim - 1).tolist())}
        kernel = _cycle_basis([as_mask(p, index_low) for p in cells_p])
        z_vectors = []
        for comb in kernel:
            v = 0
            for j, p in enumerate(cells_p):
                if comb >> j & 1:
                    v ^= 1 << index_p[p]
            z_vectors.append(v)
    b_vectors = [as_mask(p, index_p) for p in cofaces]
    return _rank_gf2(z_vectors + b_vectors) - _rank_gf2(b_vectors)


def diagram_betti(d: PersistenceDiagram, a: float, b: float, dim: int) -> int:
    """Number of intervals [b_i, d_i) of ``dim`` alive on all of [a, b]."""
    m = (d.dims == dim) & (d.births <= a) & (d.deaths > b)
    return int(m.sum())
