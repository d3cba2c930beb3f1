# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(2) column reduction of a boundary matrix.

Columns are stored as sorted index vectors; adding two columns is a merge
that drops common entries. Clearing (twist) skips columns already known to
reduce to zero, which leaves the pairing unchanged.
"""
import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector

cnp.import_array()


cdef void _add_into(vector[long long]& a, const vector[long long]& b,
                    vector[long long]& tmp) noexcept nogil:
    cdef size_t i = 0, j = 0
    cdef size_t na = a.size(), nb = b.size()
    tmp.clear()
    while i < na and j < nb:
        if a[i] < b[j]:
            tmp.push_back(a[i]); i += 1
        elif b[j] < a[i]:
            tmp.push_back(b[j]); j += 1
        else:
            i += 1; j += 1
    while i < na:
        tmp.push_back(a[i]); i += 1
    while j < nb:
        tmp.push_back(b[j]); j += 1
    a.swap(tmp)


def reduce_boundary(indptr, indices, dims, bint clearing=True):
    """Reduce the boundary matrix given in CSC form (filtration order).

    Returns ``low`` with ``low[j]`` the pivot row of reduced column ``j``
    or ``-1`` when the column reduced to zero.
    """
    cdef cnp.int64_t[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.int64_t[:] dm = np.ascontiguousarray(dims, dtype=np.int64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t j, p, q, piv, col
    cdef long long max_dim = -1
    cdef vector[vector[long long]] cols
    cdef vector[long long] tmp
    cdef vector[long long] order
    low_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[:] low = low_arr
    cdef cnp.int64_t[:] owner = np.full(n, -1, dtype=np.int64)
    cdef cnp.uint8_t[:] cleared = np.zeros(n, dtype=np.uint8)

    cols.resize(n)
    for j in range(n):
        if dm[j] > max_dim:
            max_dim = dm[j]
        for p in range(ip[j], ip[j + 1]):
            cols[j].push_back(ix[p])

    with nogil:
        if clearing:
            for q in range(max_dim, 0, -1):
                for j in range(n):
                    if dm[j] == q:
                        order.push_back(j)
        else:
            for j in range(n):
                order.push_back(j)

        for p in range(<Py_ssize_t>order.size()):
            col = order[p]
            if cleared[col]:
                cols[col].clear()
                continue
            while cols[col].size() > 0:
                piv = cols[col].back()
                if owner[piv] == -1:
                    break
                _add_into(cols[col], cols[owner[piv]], tmp)
            if cols[col].size() > 0:
                piv = cols[col].back()
                low[col] = piv
                owner[piv] = col
                if clearing:
                    cleared[piv] = 1
    return low_arr
