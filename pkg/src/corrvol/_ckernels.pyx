# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel lane: scalar-loop float32 dot products.

Accumulation is float32 in ascending channel order, matching the numpy lane
bit for bit.  The extension is compiled with -ffp-contract=off so the
compiler cannot fuse multiply+add into FMA (which would skip the intermediate
rounding the numpy lane performs).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def corr_pairs(const cnp.float32_t[:, ::1] a, const cnp.float32_t[:, ::1] b):
    """All-pairs float32 dot products: [n, D] x [m, D] -> [n, m]."""
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"channel counts differ: {a.shape[1]} vs {b.shape[1]}")
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], dims = a.shape[1]
    out = np.empty((n, m), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] o = out
    cdef Py_ssize_t i, j, d
    cdef float acc
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for d in range(dims):
                acc = acc + a[i, d] * b[j, d]
            o[i, j] = acc
    return out


def corr_gather(const cnp.float32_t[:, ::1] f1, const cnp.float32_t[:, ::1] f2,
                const cnp.int64_t[::1] idx, const cnp.uint8_t[::1] valid):
    """Row-wise float32 dots of f1 rows against f2[idx] rows where valid."""
    cdef Py_ssize_t p = f1.shape[0], dims = f1.shape[1]
    out = np.empty(p, dtype=np.float32)
    cdef cnp.float32_t[::1] o = out
    cdef Py_ssize_t i, d, j
    cdef float acc
    for i in range(p):
        if valid[i]:
            j = idx[i]
            acc = 0.0
            for d in range(dims):
                acc = acc + f1[i, d] * f2[j, d]
            o[i] = acc
        else:
            o[i] = 0.0
    return out


def block_mmm(const cnp.float32_t[:, :, ::1] at, const cnp.float32_t[:, :, ::1] bt):
    """Batched correlation blocks: [k, n, D] x [k, m, D] -> [k, n, m]."""
    cdef Py_ssize_t k = at.shape[0], n = at.shape[1], dims = at.shape[2]
    cdef Py_ssize_t m = bt.shape[1]
    out = np.empty((k, n, m), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] o = out
    cdef Py_ssize_t q, u, v, d
    cdef float acc
    for q in range(k):
        for u in range(n):
            for v in range(m):
                acc = 0.0
                for d in range(dims):
                    acc = acc + at[q, u, d] * bt[q, v, d]
                o[q, u, v] = acc
    return out
