# cython: language_level=3
"""Compiled training hot loops; mirrors slimboard.kernels.pure.

Both kernels parallelize over independent work units (candidate rows,
target columns) with a fixed sequential order inside each unit, so the
output is bitwise identical regardless of thread count or schedule.
"""

import numpy as np

cimport openmp
from cython.parallel cimport prange, threadid


def set_num_threads(int count):
    """Cap the OpenMP worker count (results do not depend on it)."""
    openmp.omp_set_num_threads(count)


def greedy_scan_deltas(double[:, ::1] resid,
                       long long[::1] indptr,
                       long long[::1] indices,
                       double[::1] data,
                       long long[::1] candidates,
                       double[::1] col_sq,
                       double lam1,
                       double lamF):
    """Per-candidate loss change for filling a row with optimal weights."""
    cdef Py_ssize_t n = resid.shape[1]
    cdef Py_ssize_t nc = candidates.shape[0]
    out_np = np.zeros(nc)
    cdef double[::1] out = out_np
    cdef int nthreads = openmp.omp_get_max_threads()
    ws_np = np.zeros((max(nthreads, 1), n))
    cdef double[:, ::1] ws = ws_np
    cdef double half = 0.5 * lam1
    cdef Py_ssize_t k, i, t, u, j
    cdef long long lo, hi
    cdef double denom, v, acc, e
    cdef int tid

    for k in prange(nc, nogil=True, schedule="dynamic"):
        i = candidates[k]
        lo = indptr[i]
        hi = indptr[i + 1]
        denom = lamF + col_sq[i]
        if hi == lo or denom <= 0.0:
            continue
        tid = threadid()
        for j in range(n):
            ws[tid, j] = 0.0
        for t in range(lo, hi):
            u = indices[t]
            v = data[t]
            for j in range(n):
                ws[tid, j] += v * resid[u, j]
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            e = ws[tid, j] - half
            if e > 0.0:
                acc = acc + e * e
        out[k] = -acc / denom
    return out_np


def cd_sweep(long long[::1] indptr,
             long long[::1] indices,
             double[::1] data,
             double[:, ::1] W,
             double[::1, :] R,
             double[::1] col_sq,
             double lam1,
             double lamF):
    """One cyclic coordinate-descent sweep over every column of W, in place."""
    cdef Py_ssize_t n = W.shape[0]
    cdef double half = 0.5 * lam1
    cdef Py_ssize_t i, j, t
    cdef long long lo, hi
    cdef double denom, c, w_old, w_new, d

    for j in prange(n, nogil=True, schedule="dynamic"):
        for i in range(n):
            if i == j:
                continue
            lo = indptr[i]
            hi = indptr[i + 1]
            if hi == lo:
                continue
            denom = col_sq[i] + lamF
            if denom <= 0.0:
                continue
            w_old = W[i, j]
            c = col_sq[i] * w_old
            for t in range(lo, hi):
                c = c + data[t] * R[indices[t], j]
            w_new = (c - half) / denom
            if w_new < 0.0:
                w_new = 0.0
            if w_new != w_old:
                d = w_new - w_old
                for t in range(lo, hi):
                    R[indices[t], j] -= d * data[t]
                W[i, j] = w_new
