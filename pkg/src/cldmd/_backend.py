"""Selects the compiled Gram kernel when available.

Set ``CLDMD_BACKEND=python`` to force the numpy fallback, or
``CLDMD_BACKEND=cython`` to fail loudly if the extension is missing.
"""
import os

import numpy as np

from . import _gram_py

_requested = os.environ.get("CLDMD_BACKEND", "auto").lower()

_compiled = None
if _requested != "python":
    try:
        from . import _gram_core as _compiled
    except ImportError:
        if _requested == "cython":
            raise

BACKEND = "cython" if _compiled is not None else "python"

_threads = 0


def set_threads(n):
    """Set worker threads for the compiled kernel (0 means all cores)."""
    global _threads
    _threads = max(0, int(n))


def get_threads():
    return _threads if _threads > 0 else (os.cpu_count() or 1)


def weighted_block_gram(xa, pa, wa, offa, xb, qb, wb, offb, width, backend=None):
    """Blockwise weighted kernel sums.

    For block ``i`` of side A (rows ``offa[i]:offa[i+1]``) and block ``j`` of
    side B, returns::

        sum_k sum_l wa[k] * wb[l] * exp(-|xa[k] - xb[l]|^2 / width) * (pa[k] . qb[l])
    """
    args = (
        np.ascontiguousarray(xa, dtype=np.float64),
        np.ascontiguousarray(pa, dtype=np.float64),
        np.ascontiguousarray(wa, dtype=np.float64),
        np.ascontiguousarray(offa, dtype=np.intp),
        np.ascontiguousarray(xb, dtype=np.float64),
        np.ascontiguousarray(qb, dtype=np.float64),
        np.ascontiguousarray(wb, dtype=np.float64),
        np.ascontiguousarray(offb, dtype=np.intp),
        float(width),
    )
    which = backend or BACKEND
    if which == "cython":
        if _compiled is None:
            raise RuntimeError("compiled backend is not available")
        return _compiled.weighted_block_gram(*args, get_threads())
    return _gram_py.weighted_block_gram(*args)
