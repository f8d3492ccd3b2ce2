"""Assembly of the Gram and interaction matrices by Simpson quadrature.

Naming follows the two function spaces involved. ``G`` is the Gram matrix of
the control occupation kernels (one per recorded trajectory, vector valued);
``G_tilde`` is the Gram matrix of the scalar basis (kernel functions at
centers, or occupation kernels of selected trajectories). ``I_mat`` pairs the
basis, pulled back through the feedback multiplication operator, with the
control occupation kernels; ``I_tilde`` pairs the basis with the adjoint of the
control Liouville operator applied to them, which reduces to kernel
differences between trajectory end and start points.

Every entry is an independent weighted kernel sum, evaluated by
:func:`cldmd._backend.weighted_block_gram`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .data import DataCentric, Dataset, KernelBasis
from .exceptions import InvalidArgumentError
from .kernels import GaussianKernel, KernelOperator
from .numerics import solve_regularized

__all__ = [
    "OperatorMatrices",
    "gram_control_occupation",
    "gram_alpha_kernel",
    "gram_alpha_occupation",
    "interaction_tilde_kernel",
    "interaction_tilde_occupation",
    "interaction_I_kernel",
    "interaction_I_occupation",
    "assemble",
    "finite_rank_matrix",
    "dump_matrices",
]

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class OperatorMatrices:
    G: np.ndarray
    G_tilde: np.ndarray
    I_mat: np.ndarray
    I_tilde: np.ndarray
    eps: float = DEFAULT_EPS
    eps_tilde: float = DEFAULT_EPS

    @property
    def G_reg(self):
        return self.G + self.eps * np.eye(len(self.G))

    @property
    def G_tilde_reg(self):
        return self.G_tilde + self.eps_tilde * np.eye(len(self.G_tilde))

    def condition_numbers(self):
        return {
            "G": float(np.linalg.cond(self.G)),
            "G_reg": float(np.linalg.cond(self.G_reg)),
            "G_tilde": float(np.linalg.cond(self.G_tilde)),
            "G_tilde_reg": float(np.linalg.cond(self.G_tilde_reg)),
        }


def _ones(n):
    return np.ones((n, 1))


def _augment(u):
    """Rows ``(1, u_k^T)``."""
    return np.hstack([_ones(len(u)), u])


def _trajectory_blocks(trajs, rows):
    """Stack sampled points, per-sample channel rows and Simpson weights."""
    X = np.vstack([tr.states for tr in trajs])
    P = np.vstack([rows(tr) for tr in trajs])
    W = np.concatenate([tr.quadrature.scaled for tr in trajs])
    off = np.concatenate([[0], np.cumsum([tr.n_samples for tr in trajs])])
    return X, P, W, off


def _point_blocks(points, rows):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return points, rows, np.ones(len(points)), np.arange(len(points) + 1)


def _endpoint_blocks(trajs):
    """Blocks of (end, start) pairs with weights (+1, -1)."""
    X = np.vstack([np.vstack([tr.states[-1], tr.states[0]]) for tr in trajs])
    W = np.tile([1.0, -1.0], len(trajs))
    off = 2 * np.arange(len(trajs) + 1)
    return X, _ones(len(X)), W, off


def _check_operator(ds: Dataset, kop: KernelOperator):
    if kop.channels != ds.control_dim + 1:
        raise InvalidArgumentError(
            f"kernel operator has {kop.channels} channels; dataset needs "
            f"{ds.control_dim + 1}")


def _check_centers(centers, ds: Dataset):
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != ds.state_dim:
        raise InvalidArgumentError(
            f"centers have dimension {centers.shape[1]}, states {ds.state_dim}")
    return centers


def _gram(a, b, width):
    return _backend.weighted_block_gram(*a, *b, width)


def _symmetrize(A):
    return 0.5 * (A + A.T)


def gram_control_occupation(ds: Dataset, kop: KernelOperator) -> np.ndarray:
    """Gram matrix ``G`` of the control occupation kernels (``M x M``)."""
    _check_operator(ds, kop)
    a = _trajectory_blocks(ds, lambda tr: kop.left_factor(_augment(tr.controls)))
    b = _trajectory_blocks(ds, lambda tr: _augment(tr.controls))
    return _symmetrize(_gram(a, b, kop.scalar.width))


def gram_alpha_kernel(centers, k: GaussianKernel) -> np.ndarray:
    return k.matrix(centers, centers)


def gram_alpha_occupation(ds: Dataset, indices, k: GaussianKernel) -> np.ndarray:
    sub = _subset(ds, indices)
    a = _trajectory_blocks(sub, lambda tr: _ones(tr.n_samples))
    return _symmetrize(_gram(a, a, k.width))


def interaction_tilde_kernel(centers, ds: Dataset, k: GaussianKernel) -> np.ndarray:
    """Entry ``(i, k)``: ``K(c_i, end_k) - K(c_i, start_k)``; no integral."""
    centers = _check_centers(centers, ds)
    return _gram(_point_blocks(centers, _ones(len(centers))),
                 _endpoint_blocks(ds), k.width)


def interaction_tilde_occupation(ds: Dataset, indices, k: GaussianKernel) -> np.ndarray:
    sub = _subset(ds, indices)
    a = _trajectory_blocks(sub, lambda tr: _ones(tr.n_samples))
    return _gram(a, _endpoint_blocks(ds), k.width)


def interaction_I_kernel(centers, ds: Dataset, kop: KernelOperator, law) -> np.ndarray:
    """Entry ``(j, k)``: integral over trajectory k of
    ``(1, mu(c_j)^T) K(gamma_k(t), c_j) (1, u_k(t)^T)^T``."""
    _check_operator(ds, kop)
    centers = _check_centers(centers, ds)
    mu = np.atleast_2d(law(centers)).reshape(len(centers), ds.control_dim)
    a = _point_blocks(centers, kop.left_factor(_augment(mu)))
    b = _trajectory_blocks(ds, lambda tr: _augment(tr.controls))
    return _gram(a, b, kop.scalar.width)


def interaction_I_occupation(ds: Dataset, indices, kop: KernelOperator, law) -> np.ndarray:
    """Entry ``(i, k)``: double integral of
    ``(1, mu(gamma_i(tau))^T) K(gamma_k(t), gamma_i(tau)) (1, u_k(t)^T)^T``."""
    _check_operator(ds, kop)
    sub = _subset(ds, indices)

    def rows(tr):
        mu = np.asarray(law(tr.states)).reshape(tr.n_samples, ds.control_dim)
        return kop.left_factor(_augment(mu))

    a = _trajectory_blocks(sub, rows)
    b = _trajectory_blocks(ds, lambda tr: _augment(tr.controls))
    return _gram(a, b, kop.scalar.width)


def _subset(ds: Dataset, indices):
    basis = DataCentric(tuple(indices))
    basis.validate(ds)
    return [ds[i] for i in basis.indices]


def assemble(ds: Dataset, basis, kop: KernelOperator, law,
             eps: float = DEFAULT_EPS, eps_tilde: float = DEFAULT_EPS) -> OperatorMatrices:
    """Build all four matrices for either basis choice."""
    if eps < 0 or eps_tilde < 0:
        raise InvalidArgumentError("regularization coefficients must be nonnegative")
    k = kop.scalar
    G = gram_control_occupation(ds, kop)
    if isinstance(basis, KernelBasis):
        c = basis.centers
        G_tilde = gram_alpha_kernel(c, k)
        I_mat = interaction_I_kernel(c, ds, kop, law)
        I_tilde = interaction_tilde_kernel(c, ds, k)
    elif isinstance(basis, DataCentric):
        basis.validate(ds)
        G_tilde = gram_alpha_occupation(ds, basis.indices, k)
        I_mat = interaction_I_occupation(ds, basis.indices, kop, law)
        I_tilde = interaction_tilde_occupation(ds, basis.indices, k)
    else:
        raise InvalidArgumentError(f"unknown basis type {type(basis).__name__}")
    return OperatorMatrices(G, G_tilde, I_mat, I_tilde, float(eps), float(eps_tilde))


def finite_rank_matrix(m: OperatorMatrices) -> np.ndarray:
    """``(G_tilde + eps_tilde I)^-1 I_mat (G + eps I)^-1 I_tilde^T`` via two solves."""
    inner = solve_regularized(m.G, m.I_tilde.T, m.eps)
    return solve_regularized(m.G_tilde, m.I_mat @ inner, m.eps_tilde)


def dump_matrices(m: OperatorMatrices, directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in ("G", "G_tilde", "I_mat", "I_tilde"):
        path = directory / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in getattr(m, name):
                writer.writerow([repr(float(v)) for v in row])
        written.append(path)
    return written
