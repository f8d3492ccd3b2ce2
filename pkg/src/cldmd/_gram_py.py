"""Pure numpy implementation of the weighted block-Gram kernel.

Mirrors ``_gram_core.weighted_block_gram``; used when the compiled module is
unavailable or when ``CLDMD_BACKEND=python``.
"""
import numpy as np


def weighted_block_gram(xa, pa, wa, offa, xb, qb, wb, offb, width, threads=1):
    na = len(offa) - 1
    nb = len(offb) - 1
    out = np.zeros((na, nb))
    starts_b = np.asarray(offb[:-1])
    qbw = qb * wb[:, None]
    for i in range(na):
        sl = slice(offa[i], offa[i + 1])
        x = xa[sl]
        d2 = np.zeros((x.shape[0], xb.shape[0]))
        for d in range(xa.shape[1]):
            diff = x[:, d, None] - xb[None, :, d]
            d2 += diff * diff
        kmat = np.exp(-d2 / width)
        left = pa[sl] * wa[sl, None]
        per_sample = np.zeros(xb.shape[0])
        for c in range(pa.shape[1]):
            per_sample += (left[:, c] @ kmat) * qbw[:, c]
        out[i] = np.add.reduceat(per_sample, starts_b)
    return out
