"""Pure-Python GF(2) column reduction, used when the Cython kernel is absent."""
import numpy as np


def reduce_boundary(indptr, indices, dims, clearing=True):
    """Reduce the boundary matrix given in CSC form (filtration order).

    Same contract as the compiled kernel: ``low[j]`` is the pivot row of
    reduced column ``j`` or ``-1`` for a zero column.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    dims = np.asarray(dims, dtype=np.int64)
    n = len(indptr) - 1
    cols = [set(indices[indptr[j]:indptr[j + 1]].tolist()) for j in range(n)]
    low = np.full(n, -1, dtype=np.int64)
    owner = {}
    cleared = set()
    if clearing and n:
        order = [j for q in range(int(dims.max()), 0, -1) for j in np.flatnonzero(dims == q).tolist()]
    else:
        order = range(n)
    for j in order:
        if j in cleared:
            cols[j] = set()
            continue
        col = cols[j]
        while col:
            piv = max(col)
            other = owner.get(piv)
            if other is None:
                break
            col ^= cols[other]
        if col:
            piv = max(col)
            low[j] = piv
            owner[piv] = j
            if clearing:
                cleared.add(piv)
    return low
