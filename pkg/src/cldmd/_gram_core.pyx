# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled weighted block-Gram kernel.

Each output entry is reduced by one thread in a fixed loop order, so results
do not depend on the thread count.
"""
import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp


def weighted_block_gram(const double[:, ::1] xa, const double[:, ::1] pa,
                        const double[::1] wa, const Py_ssize_t[::1] offa,
                        const double[:, ::1] xb, const double[:, ::1] qb,
                        const double[::1] wb, const Py_ssize_t[::1] offb,
                        double width, int threads=1):
    cdef Py_ssize_t na = offa.shape[0] - 1
    cdef Py_ssize_t nb = offb.shape[0] - 1
    cdef Py_ssize_t dim = xa.shape[1]
    cdef Py_ssize_t nch = pa.shape[1]
    out_arr = np.zeros((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, l, d, c
    cdef double s, inner, d2, diff, dot

    if threads <= 1 or na * nb < 64:
        for i in range(na):
            for j in range(nb):
                s = 0.0
                for k in range(offa[i], offa[i + 1]):
                    inner = 0.0
                    for l in range(offb[j], offb[j + 1]):
                        d2 = 0.0
                        for d in range(dim):
                            diff = xa[k, d] - xb[l, d]
                            d2 = d2 + diff * diff
                        dot = 0.0
                        for c in range(nch):
                            dot = dot + pa[k, c] * qb[l, c]
                        inner = inner + wb[l] * exp(-d2 / width) * dot
                    s = s + wa[k] * inner
                out[i, j] = s
        return out_arr

    for i in prange(na, nogil=True, schedule="dynamic", num_threads=threads):
        for j in range(nb):
            s = 0.0
            for k in range(offa[i], offa[i + 1]):
                inner = 0.0
                for l in range(offb[j], offb[j + 1]):
                    d2 = 0.0
                    for d in range(dim):
                        diff = xa[k, d] - xb[l, d]
                        d2 = d2 + diff * diff
                    dot = 0.0
                    for c in range(nch):
                        dot = dot + pa[k, c] * qb[l, c]
                    inner = inner + wb[l] * exp(-d2 / width) * dot
                s = s + wa[k] * inner
            out[i, j] = s
    return out_arr
