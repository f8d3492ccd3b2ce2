"""Scalar Gaussian kernel and the matrix-valued kernel operator built on it.

The Gaussian is parametrized by its *width* ``k`` as ``exp(-|x - y|^2 / k)``.
This is not a bandwidth: there is no factor of two and no square.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "GaussianKernel",
    "KernelOperator",
    "eval_scalar",
    "augmented_pair_integrand",
    "feedback_pair_integrand",
]


@dataclass(frozen=True)
class GaussianKernel:
    width: float

    def __post_init__(self):
        if not (np.isfinite(self.width) and self.width > 0):
            raise InvalidArgumentError(f"kernel width must be positive, got {self.width}")

    def __call__(self, x, y) -> float:
        return eval_scalar(self, x, y)

    def matrix(self, X, Y) -> np.ndarray:
        """Kernel matrix between the rows of ``X`` and ``Y``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[1] != Y.shape[1]:
            raise InvalidArgumentError(
                f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        diff = X[:, None, :] - Y[None, :, :]
        return np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / self.width)

    def to_dict(self):
        return {"type": "gaussian", "width": float(self.width)}


@dataclass(frozen=True)
class KernelOperator:
    """Matrix-valued kernel ``K(x, y) = Ktilde(x, y) * A``.

    ``A`` is a symmetric positive definite ``channels x channels`` matrix, where
    ``channels = m + 1`` for ``m`` control inputs. ``matrix=None`` selects the
    diagonal operator ``A = I`` with its fast path.
    """

    scalar: GaussianKernel
    channels: int
    matrix: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.channels < 1:
            raise InvalidArgumentError(f"channels must be >= 1, got {self.channels}")
        if self.matrix is not None:
            A = np.asarray(self.matrix, dtype=float)
            if A.shape != (self.channels, self.channels):
                raise InvalidArgumentError(
                    f"operator matrix must be {self.channels}x{self.channels}, "
                    f"got {A.shape}")
            if not np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max()):
                raise InvalidArgumentError("operator matrix must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise InvalidArgumentError("operator matrix must be positive definite")
            object.__setattr__(self, "matrix", A)

    @classmethod
    def diagonal(cls, scalar: GaussianKernel, control_dim: int) -> "KernelOperator":
        return cls(scalar, control_dim + 1)

    @property
    def is_diagonal(self) -> bool:
        return self.matrix is None

    @property
    def control_dim(self) -> int:
        return self.channels - 1

    def eval_operator(self, x, y) -> np.ndarray:
        A = np.eye(self.channels) if self.matrix is None else self.matrix
        return eval_scalar(self.scalar, x, y) * A

    def left_factor(self, V) -> np.ndarray:
        """Map row vectors ``v`` (stacked in ``V``) to ``v @ A``."""
        V = np.asarray(V, dtype=float)
        return V if self.matrix is None else V @ self.matrix

    def to_dict(self):
        if self.matrix is None:
            return {"type": "diagonal"}
        return {"type": "matrix", "A": self.matrix.tolist()}


def _vec(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {x.shape}")
    return x


def eval_scalar(k: GaussianKernel, x, y) -> float:
    x, y = _vec(x, "x"), _vec(y, "y")
    if x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-np.dot(d, d) / k.width))


def _pair(kop: KernelOperator, x_i, a_i, x_j, u_j) -> float:
    a_i, u_j = _vec(a_i, "left control"), _vec(u_j, "right control")
    m = kop.control_dim
    if a_i.shape != (m,) or u_j.shape != (m,):
        raise InvalidArgumentError(
            f"controls must have dimension {m}, got {a_i.shape} and {u_j.shape}")
    kval = eval_scalar(kop.scalar, x_j, x_i)
    if kop.is_diagonal:
        return kval * (1.0 + float(np.dot(a_i, u_j)))
    left = np.concatenate(([1.0], a_i))
    right = np.concatenate(([1.0], u_j))
    return float(left @ kop.eval_operator(x_j, x_i) @ right)


def augmented_pair_integrand(kop: KernelOperator, x_i, u_i, x_j, u_j) -> float:
    """``(1, u_i^T) K(x_j, x_i) (1, u_j^T)^T``; the integrand of the Gram matrix G."""
    return _pair(kop, x_i, u_i, x_j, u_j)


def feedback_pair_integrand(kop: KernelOperator, x_i, mu_at_x_i, x_j, u_j) -> float:
    """Same form with the feedback value ``mu(x_i)`` on the left."""
    return _pair(kop, x_i, mu_at_x_i, x_j, u_j)
