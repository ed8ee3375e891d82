"""Reference NumPy implementations of the training hot loops.

These mirror the compiled module `slimboard.kernels._native` operation for
operation; the package `__init__` picks one of the two at import time.
Within one backend the results are bitwise deterministic; across backends
they agree to floating-point rounding (summation orders differ).
"""

from __future__ import annotations

import numpy as np


def set_num_threads(count: int) -> None:
    """No-op: the reference backend is single-threaded."""


def greedy_scan_deltas(resid, indptr, indices, data, candidates, col_sq, lam1, lamF):
    """Loss change obtained by filling each candidate row with optimal weights.

    For candidate item i the change is -sum_{j != i} max(0, c_j - lam1/2)^2
    / (lamF + s_i), where c = X_hat^T x_i runs over the raters of i (CSC
    arrays of X) and s_i = col_sq[i]. `resid` is the dense residual X_hat.
    Returns one nonpositive delta per candidate.
    """
    half = 0.5 * lam1
    out = np.zeros(len(candidates))
    for k, i in enumerate(candidates):
        lo, hi = indptr[i], indptr[i + 1]
        denom = lamF + col_sq[i]
        if hi == lo or denom <= 0.0:
            continue
        c = data[lo:hi] @ resid[indices[lo:hi], :]
        excess = c - half
        excess[i] = 0.0
        np.maximum(excess, 0.0, out=excess)
        out[k] = -float(excess @ excess) / denom
    return out


def cd_sweep(indptr, indices, data, W, R, col_sq, lam1, lamF):
    """One cyclic coordinate-descent sweep over every column of W, in place.

    W[i, j] is the weight of source item i in the model of target item j;
    R[:, j] holds the dense residual x_j - X w_j and is kept consistent with
    every accepted update. Columns are independent, so sweep order across j
    does not affect the result.
    """
    half = 0.5 * lam1
    n = W.shape[0]
    for j in range(n):
        r = R[:, j]
        for i in range(n):
            if i == j:
                continue
            lo, hi = indptr[i], indptr[i + 1]
            denom = col_sq[i] + lamF
            if hi == lo or denom <= 0.0:
                continue
            rows = indices[lo:hi]
            vals = data[lo:hi]
            w_old = W[i, j]
            c = float(vals @ r[rows]) + col_sq[i] * w_old
            w_new = (c - half) / denom
            if w_new < 0.0:
                w_new = 0.0
            if w_new != w_old:
                r[rows] -= (w_new - w_old) * vals
                W[i, j] = w_new
