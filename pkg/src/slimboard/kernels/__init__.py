"""Backend selection for the numerical hot loops.

Set ``SLIMBOARD_KERNELS=native`` or ``=pure`` to force a backend; the
default (``auto``) uses the compiled extension when it imported cleanly and
the NumPy reference otherwise. Artifacts are bitwise reproducible for a
fixed backend; the two backends agree to floating-point rounding.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from . import pure

log = logging.getLogger(__name__)

_requested = os.environ.get("SLIMBOARD_KERNELS", "auto")
if _requested not in ("auto", "native", "pure"):
    log.warning("SLIMBOARD_KERNELS=%r not recognized; using auto", _requested)
    _requested = "auto"

_impl = pure
_name = "pure"
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        _name = "native"
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "SLIMBOARD_KERNELS=native but the compiled extension is not available"
            )


def backend_name() -> str:
    """Name of the active backend: "native" or "pure"."""
    return _name


def set_num_threads(count: int) -> None:
    """Cap the worker count; the numbers computed do not depend on it."""
    if count < 1:
        raise ValueError("thread count must be at least 1")
    _impl.set_num_threads(int(count))


def _index_array(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def greedy_scan_deltas(resid, indptr, indices, data, candidates, col_sq, lam1, lamF):
    """Dispatch to the active backend; see :mod:`slimboard.kernels.pure`."""
    resid = np.ascontiguousarray(resid, dtype=np.float64)
    return _impl.greedy_scan_deltas(
        resid,
        _index_array(indptr),
        _index_array(indices),
        np.ascontiguousarray(data, dtype=np.float64),
        _index_array(candidates),
        np.ascontiguousarray(col_sq, dtype=np.float64),
        float(lam1),
        float(lamF),
    )


def cd_sweep(indptr, indices, data, W, R, col_sq, lam1, lamF):
    """Dispatch to the active backend; W and R are updated in place."""
    # In-place semantics forbid silent copies of W and R.
    if not (isinstance(W, np.ndarray) and W.dtype == np.float64 and W.flags.c_contiguous):
        raise TypeError("W must be a C-contiguous float64 array")
    if not (isinstance(R, np.ndarray) and R.dtype == np.float64 and R.flags.f_contiguous):
        raise TypeError("R must be an F-contiguous float64 array")
    _impl.cd_sweep(
        _index_array(indptr),
        _index_array(indices),
        np.ascontiguousarray(data, dtype=np.float64),
        W,
        R,
        np.ascontiguousarray(col_sq, dtype=np.float64),
        float(lam1),
        float(lamF),
    )
