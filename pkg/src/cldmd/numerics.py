"""Quadrature, deterministic eigendecomposition and linear solves.

Every routine here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import InvalidArgumentError, NumericFailureError, SingularMatrixError

__all__ = [
    "QuadratureWeights",
    "EigenPairs",
    "simpson_weights",
    "quad_1d",
    "quad_2d",
    "eig_general",
    "solve_regularized",
    "solve_complex",
]


@dataclass(frozen=True)
class QuadratureWeights:
    """Weights of a uniform-grid rule.

    ``weights`` are unitless multipliers of ``step``; the integral of samples
    ``y`` is ``step * sum(weights * y)``.
    """

    weights: np.ndarray
    step: float

    def __len__(self):
        return len(self.weights)

    @property
    def scaled(self) -> np.ndarray:
        """Weights already multiplied by the step."""
        return self.weights * self.step


def simpson_weights(n_samples: int, h: float) -> QuadratureWeights:
    """Composite Simpson weights for ``n_samples`` uniformly spaced points.

    Odd sample counts use the 1/3 rule throughout. Even counts use the 1/3 rule
    on the leading ``n_samples - 3`` points and the 3/8 rule on the final three
    intervals, so cubics stay exact. Two samples degrade to the trapezoid rule.
    """
    n = int(n_samples)
    if n != n_samples or n < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {n_samples!r}")
    if not h > 0:
        raise InvalidArgumentError(f"step must be positive, got {h!r}")
    w = np.zeros(n)
    if n == 2:
        w[:] = 0.5
        return QuadratureWeights(w, float(h))

    n13 = n if n % 2 == 1 else n - 3  # points covered by the 1/3 rule
    if n13 >= 3:
        w[0:n13:2] += 2.0 / 3.0
        w[1:n13:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[n13 - 1] -= 1.0 / 3.0
    if n % 2 == 0:
        w[n - 4:] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return QuadratureWeights(w, float(h))


def quad_1d(samples, w: QuadratureWeights):
    """Integrate uniformly spaced samples with precomputed weights."""
    y = np.asarray(samples)
    if y.ndim != 1 or y.shape[0] != len(w):
        raise InvalidArgumentError(
            f"sample length {y.shape} does not match {len(w)} weights")
    return w.step * np.dot(w.weights, y)


def quad_2d(samples, w_t: QuadratureWeights, w_tau: QuadratureWeights):
    """Tensor-product rule over a ``len(w_t) x len(w_tau)`` grid of samples."""
    y = np.asarray(samples)
    if y.shape != (len(w_t), len(w_tau)):
        raise InvalidArgumentError(
            f"sample grid {y.shape} does not match weights "
            f"({len(w_t)}, {len(w_tau)})")
    return w_t.step * w_tau.step * (w_t.weights @ y @ w_tau.weights)


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues with matching unit-norm, phase-fixed eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.values)


def _order(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    # Descending real part, then descending imaginary part so that a
    # conjugate pair comes out as (+Im, -Im), then by pivot row.
    pivot = np.argmax(np.abs(vectors), axis=0)
    return np.lexsort((pivot, -values.imag, -values.real))


def eig_general(A) -> EigenPairs:
    """Eigendecomposition of a real square matrix with a reproducible layout.

    Pairs are sorted by descending real part, conjugate pairs are adjacent
    with the positive imaginary part first, and each eigenvector has unit
    2-norm with its largest-magnitude entry real and positive.

    Raises
    ------
    NumericFailureError
        If LAPACK fails to converge. The message carries the 2-norm
        condition number of ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError("matrix has non-finite entries")
    try:
        values, vectors = linalg.eig(A)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(A)
        raise NumericFailureError(
            f"eigensolver did not converge (cond={cond:.3e}, "
            f"|A|_F={np.linalg.norm(A):.3e}): {exc}") from exc

    vectors = vectors / np.linalg.norm(vectors, axis=0)
    pivot = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[pivot, np.arange(vectors.shape[1])]
    vectors = vectors * (np.abs(lead) / lead)
    # Make the pivot entry exactly real so conjugate columns stay exact mirrors.
    vectors[pivot, np.arange(vectors.shape[1])] = np.abs(
        vectors[pivot, np.arange(vectors.shape[1])])

    idx = _order(values, vectors)
    return EigenPairs(values[idx], vectors[:, idx])


def solve_regularized(G, B, eps: float = 0.0) -> np.ndarray:
    """Solve ``(G + eps*I) X = B`` through a Cholesky factorization.

    Raises
    ------
    SingularMatrixError
        If ``G + eps*I`` is not numerically positive definite.
    """
    G = np.asarray(G, dtype=float)
    B = np.asarray(B)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {G.shape}")
    if B.shape[0] != G.shape[0]:
        raise InvalidArgumentError(
            f"right-hand side has {B.shape[0]} rows, matrix has {G.shape[0]}")
    if eps < 0:
        raise InvalidArgumentError(f"eps must be nonnegative, got {eps}")
    scale = max(np.abs(G).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(G - G.T).max(initial=0.0) > 1e-10 * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    Greg = G + eps * np.eye(G.shape[0])
    try:
        factor = linalg.cho_factor(Greg, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"Gram matrix plus {eps:g}*I is not positive definite; "
            "increase the regularization coefficient") from exc
    return linalg.cho_solve(factor, B)


def solve_complex(M, B, max_cond: float = 1e14) -> np.ndarray:
    """Solve ``M X = B`` for a general complex square ``M`` by LU."""
    M = np.asarray(M, dtype=complex)
    B = np.asarray(B)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {M.shape}")
    if B.shape[0] != M.shape[0]:
        raise InvalidArgumentError(
            f"right-hand side has {B.shape[0]} rows, matrix has {M.shape[0]}")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularMatrixError(
            f"matrix is numerically singular (cond={cond:.3e} > {max_cond:.0e})")
    lu = linalg.lu_factor(M)
    return linalg.lu_solve(lu, B.astype(complex))
