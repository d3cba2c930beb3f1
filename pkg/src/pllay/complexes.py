"""Filtered cubical and Vietoris-Rips complexes.

A :class:`FilteredComplex` stores its cells as parallel arrays already sorted
by ``(value, dim, id)``. Boundaries are kept in CSC form with indices that
refer to positions in that sorted order, so the reduction can run on them
directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .data import GridFunction, PointCloud, grid_points
from .dtm import DtmField, DtmParams, dtm_points, dtm_weights


class Cell(NamedTuple):
    id: int
    dim: int
    boundary: tuple
    vertex_set: tuple
    filtration_value: float
    argmax_vertex: int


@dataclass
class FilteredComplex:
    dims: np.ndarray
    values: np.ndarray
    ids: np.ndarray
    argmax: np.ndarray
    verts: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    vertex_count: int
    max_dim: int
    kind: str = "cubical"
    shape: tuple | None = None
    provenance: DtmField | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.dims)

    def boundary(self, pos: int) -> np.ndarray:
        return self.indices[self.indptr[pos] : self.indptr[pos + 1]]

    def cell(self, pos: int) -> Cell:
        vs = self.verts[pos]
        return Cell(int(self.ids[pos]), int(self.dims[pos]),
                    tuple(int(self.ids[b]) for b in self.boundary(pos)),
                    tuple(int(v) for v in vs[vs >= 0]), float(self.values[pos]),
                    int(self.argmax[pos]))

    @property
    def cells(self) -> list[Cell]:
        return [self.cell(i) for i in range(len(self))]

    def check_filtration(self) -> None:
        """Raise ``ValueError`` unless every boundary cell precedes its coface with no larger value."""
        for pos in range(len(self)):
            b = self.boundary(pos)
            if b.size and (b.max() >= pos or np.any(self.values[b] > self.values[pos])):
                raise ValueError(f"cell at position {pos} violates the filtration order")

    def dump(self) -> str:
        lines = []
        for pos in range(len(self)):
            vs = self.verts[pos]
            lines.append(f"{self.dims[pos]} {float(self.values[pos])!r} " + " ".join(str(v) for v in vs[vs >= 0]))
        return "\n".join(lines)


def _finalize(dims, values, argmax, verts, bnd_lists, vertex_count, max_dim, kind, shape=None):
    """Sort cells by (value, dim, id) and remap boundaries to sorted positions.

    ``bnd_lists`` is a list of (n_cells_of_dim, faces) integer arrays, one per
    dim >= 1, in construction-id order after the vertices.
    """
    n = len(dims)
    ids = np.arange(n)
    perm = np.lexsort((ids, dims, values))
    pos = np.empty(n, dtype=np.int64)
    pos[perm] = np.arange(n)

    counts = np.zeros(n, dtype=np.int64)
    flat = np.full((n, 4), -1, dtype=np.int64)
    start = vertex_count
    for arr in bnd_lists:
        m, f = arr.shape
        counts[start : start + m] = f
        flat[start : start + m, :f] = pos[arr]
        start += m
    counts = counts[perm]
    flat = flat[perm]
    flat = np.where(flat < 0, np.iinfo(np.int64).max, flat)
    flat.sort(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    mask = np.arange(4)[None, :] < counts[:, None]
    indices = flat[mask]
    return FilteredComplex(dims[perm], values[perm], ids[perm], argmax[perm], verts[perm],
                           indptr, indices, vertex_count, max_dim, kind, shape)


def cubical_sublevel(g) -> FilteredComplex:
    """Cubical complex of a grid with lower-star (max-vertex) filtration values.

    ``g`` is a :class:`GridFunction` or a 2-D array of vertex values
    (height x width); a single row gives a path complex.
    """
    arr = g.as_array() if isinstance(g, GridFunction) else np.atleast_2d(np.asarray(g, dtype=float))
    h, w = arr.shape
    f = arr.ravel()
    vid = np.arange(h * w).reshape(h, w)

    hedges = np.column_stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()])
    vedges = np.column_stack([vid[:-1, :].ravel(), vid[1:, :].ravel()])
    edges = np.concatenate([hedges, vedges]).astype(np.int64).reshape(-1, 2)
    ne_h = hedges.shape[0]
    nv = h * w

    # square (r, c): bottom edge h(r, c), top edge h(r+1, c), left v(r, c), right v(r, c+1)
    if h > 1 and w > 1:
        rr, cc = np.meshgrid(np.arange(h - 1), np.arange(w - 1), indexing="ij")
        rr, cc = rr.ravel(), cc.ravel()
        hidx = lambda r, c: r * (w - 1) + c
        vidx = lambda r, c: ne_h + r * w + c
        sq_edges = np.column_stack([hidx(rr, cc), hidx(rr + 1, cc), vidx(rr, cc), vidx(rr, cc + 1)]) + nv
        sq_verts = np.column_stack([vid[rr, cc], vid[rr, cc + 1], vid[rr + 1, cc], vid[rr + 1, cc + 1]])
    else:
        sq_edges = np.zeros((0, 4), dtype=np.int64)
        sq_verts = np.zeros((0, 4), dtype=np.int64)

    ne, ns = edges.shape[0], sq_verts.shape[0]
    verts = np.full((nv + ne + ns, 4), -1, dtype=np.int64)
    verts[:nv, 0] = np.arange(nv)
    verts[nv : nv + ne, :2] = edges
    verts[nv + ne :] = sq_verts

    dims = np.concatenate([np.zeros(nv), np.ones(ne), np.full(ns, 2)]).astype(np.int64)
    argmax = np.empty(nv + ne + ns, dtype=np.int64)
    argmax[:nv] = np.arange(nv)
    # vertex lists are ascending, so argmax picks the smallest index on ties
    if ne:
        argmax[nv : nv + ne] = edges[np.arange(ne), np.argmax(f[edges], axis=1)]
    if ns:
        argmax[nv + ne :] = sq_verts[np.arange(ns), np.argmax(f[sq_verts], axis=1)]
    values = f[argmax]
    bnd = [edges, sq_edges.astype(np.int64)] if ns else [edges]
    return _finalize(dims, values, argmax, verts, bnd, nv, 2 if ns else 1, "cubical", (h, w))


def rips(data: PointCloud, max_dim: int = 2, max_radius: float = np.inf) -> FilteredComplex:
    """Vietoris-Rips filtration with edge value ``|x_i - x_j| / 2``."""
    if not max_radius > 0:
        raise ValueError("max_radius must be positive")
    if not 0 <= max_dim <= 2:
        raise ValueError("max_dim must be 0, 1 or 2")
    pts = data.points
    n = len(pts)
    dmat = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)) / 2.0
    if max_dim >= 1 and n > 1:
        iu, ju = np.triu_indices(n, 1)
        keep = dmat[iu, ju] <= max_radius
        edges = np.column_stack([iu[keep], ju[keep]]).astype(np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    ev = dmat[edges[:, 0], edges[:, 1]] if len(edges) else np.zeros(0)
    tris = np.zeros((0, 3), dtype=np.int64)
    tri_edges = np.zeros((0, 3), dtype=np.int64)
    if max_dim >= 2 and n > 2 and len(edges):
        eid = -np.ones((n, n), dtype=np.int64)
        eid[edges[:, 0], edges[:, 1]] = np.arange(len(edges))
        combos = np.array(list(combinations(range(n), 3)), dtype=np.int64)
        a, b, c = combos[:, 0], combos[:, 1], combos[:, 2]
        e_ab, e_ac, e_bc = eid[a, b], eid[a, c], eid[b, c]
        ok = (e_ab >= 0) & (e_ac >= 0) & (e_bc >= 0)
        tris = combos[ok]
        tri_edges = np.column_stack([e_ab[ok], e_ac[ok], e_bc[ok]])
    nv, ne, nt = n, len(edges), len(tris)
    dims = np.concatenate([np.zeros(nv), np.ones(ne), np.full(nt, 2)]).astype(np.int64)
    tv = ev[tri_edges].max(axis=1) if nt else np.zeros(0)
    values = np.concatenate([np.zeros(nv), ev, tv])
    verts = np.full((nv + ne + nt, 4), -1, dtype=np.int64)
    verts[:nv, 0] = np.arange(nv)
    verts[nv : nv + ne, :2] = edges
    verts[nv + ne :, :3] = tris
    argmax = np.full(nv + ne + nt, -1, dtype=np.int64)
    bnd = [edges]
    if nt:
        bnd.append(tri_edges + nv)
    return _finalize(dims, values, argmax, verts, bnd, nv, max_dim, "rips")


def dtm_filtration(x, params: DtmParams, mode: str | None = None, grid=None, tie_tol: float = 1e-9) -> FilteredComplex:
    """Cubical sublevel filtration of a DTM field evaluated on a grid.

    * ``GridFunction`` input: the grid points carry the pixel values as
      weights and the DTM is evaluated at the grid points themselves.
    * ``PointCloud`` input: the cloud is the data and the DTM is evaluated on
      ``grid = (width, height, domain)``; the domain defaults to the cloud's
      bounding box.
    """
    if isinstance(x, GridFunction):
        if mode not in (None, "weights"):
            raise ValueError("grid input only supports the weights mode")
        pts = grid_points(x.width, x.height, x.domain)
        field_ = dtm_weights(pts, x.values, pts, params, tie_tol)
        shape = (x.height, x.width)
    elif isinstance(x, PointCloud):
        if mode not in (None, "points"):
            raise ValueError("point cloud input only supports the points mode")
        if grid is None:
            raise ValueError("a query grid (width, height[, domain]) is required for point clouds")
        width, height = grid[0], grid[1]
        domain = grid[2] if len(grid) > 2 and grid[2] is not None else (
            tuple(x.points.min(axis=0)), tuple(x.points.max(axis=0)))
        pts = grid_points(width, height, domain)
        field_ = dtm_points(x, pts, params, tie_tol)
        shape = (height, width)
    else:
        raise TypeError(f"unsupported input {type(x).__name__}")
    cx = cubical_sublevel(field_.values.reshape(shape))
    cx.provenance = field_
    return cx
