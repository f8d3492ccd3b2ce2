"""Spectral decomposition of the closed-loop finite-rank operator and prediction.

:func:`decompose` runs the full pipeline on a dataset: assemble the matrices,
form the finite-rank representation, eigendecompose it, normalize the
eigenvectors in the basis Gram metric and compute the control-Liouville modes.
The resulting :class:`Decomposition` predicts closed-loop trajectories either
directly from the spectral expansion or by integrating the reconstructed vector
field.

Complex sums are returned as their real part. Because eigenpairs come in exact
conjugate pairs, the discarded imaginary part is rounding noise; its size is
reported as ``imag_residual`` so violations are visible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .data import DataCentric, Dataset, KernelBasis, LinearGain
from .exceptions import (CLDMDError, DivergenceError, InvalidArgumentError,
                         SchemaError)
from .gramian import DEFAULT_EPS, OperatorMatrices, assemble, finite_rank_matrix
from .kernels import GaussianKernel, KernelOperator
from .numerics import eig_general, solve_complex

__all__ = [
    "Decomposition",
    "Prediction",
    "decompose",
    "normalize_eigenvectors",
    "basis_identity_coordinates",
    "modes_from",
    "eigenfunctions_at",
    "predict_direct",
    "reconstruct_field",
    "predict_indirect",
    "relative_rms",
    "save_decomposition",
    "load_decomposition",
]

FORMAT_VERSION = 1
DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class BasisEvaluator:
    """Points, weights and block offsets needed to evaluate the basis.

    Basis function ``i`` at ``x`` is
    ``sum(weights[b] * K(x, points[b]) for b in block i)``. For a kernel basis
    every block is a single center with unit weight; for occupation kernels a
    block holds one trajectory's samples with Simpson weights.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    @classmethod
    def from_basis(cls, basis, ds: Dataset | None):
        if isinstance(basis, KernelBasis):
            c = basis.centers
            return cls("kernel", c, np.ones(len(c)), np.arange(len(c) + 1))
        if isinstance(basis, DataCentric):
            if ds is None:
                raise InvalidArgumentError("a data-centric basis needs the dataset")
            basis.validate(ds)
            trajs = [ds[i] for i in basis.indices]
            return cls(
                "data_centric",
                np.vstack([tr.states for tr in trajs]),
                np.concatenate([tr.quadrature.scaled for tr in trajs]),
                np.concatenate([[0], np.cumsum([tr.n_samples for tr in trajs])]),
            )
        raise InvalidArgumentError(f"unknown basis type {type(basis).__name__}")

    def evaluate(self, X, k: GaussianKernel) -> np.ndarray:
        """Basis values at the rows of ``X``: an ``len(X) x Ntilde`` matrix."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.points.shape[1]:
            raise InvalidArgumentError(
                f"point has dimension {X.shape[1]}, basis lives in "
                f"{self.points.shape[1]}")
        return _backend.weighted_block_gram(
            X, np.ones((len(X), 1)), np.ones(len(X)), np.arange(len(X) + 1),
            self.points, np.ones((len(self.points), 1)), self.weights,
            self.offsets, k.width)

    def identity_coordinates(self) -> np.ndarray:
        """Inner products of each coordinate function with each basis element.

        Kernel basis: the centers themselves. Occupation basis: the time
        integral of each trajectory.
        """
        cols = [self.weights[a:b] @ self.points[a:b]
                for a, b in zip(self.offsets[:-1], self.offsets[1:])]
        return np.array(cols).T

    def to_dict(self):
        return {
            "kind": self.kind,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "offsets": [int(v) for v in self.offsets],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], np.array(d["points"], dtype=float),
                   np.array(d["weights"], dtype=float),
                   np.array(d["offsets"], dtype=np.intp))


@dataclass(frozen=True)
class Decomposition:
    """Eigenvalues, normalized eigen-coefficients and modes of the proxy.

    Attributes
    ----------
    eigenvalues : ndarray, shape (Ntilde,)
        Continuous-time eigenvalues (1/s).
    V_norm : ndarray, shape (Ntilde, Ntilde)
        Column ``j`` holds the basis coefficients of eigenfunction ``j``,
        scaled to unit norm in the regularized basis Gram metric.
    modes : ndarray, shape (n, Ntilde)
        Column ``j`` is the control-Liouville mode paired with eigenvalue ``j``.
    """

    eigenvalues: np.ndarray
    V_norm: np.ndarray
    modes: np.ndarray
    basis: BasisEvaluator
    kernel: KernelOperator
    eps: float
    eps_tilde: float
    law: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        # Fixed C layout so BLAS reductions (and hence results) do not depend
        # on whether the arrays came from LAPACK or from a saved file.
        for name in ("eigenvalues", "V_norm", "modes"):
            object.__setattr__(self, name,
                               np.ascontiguousarray(getattr(self, name), dtype=complex))

    @property
    def state_dim(self) -> int:
        return self.modes.shape[0]

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class Prediction:
    times: np.ndarray
    states: np.ndarray
    imag_residual: float = 0.0

    @classmethod
    def from_trajectory(cls, tr) -> "Prediction":
        return cls(np.asarray(tr.times), np.asarray(tr.states), 0.0)


def normalize_eigenvectors(vectors, G_tilde_reg) -> np.ndarray:
    """Scale each column ``v`` by ``1 / sqrt(v^H G v)``."""
    vectors = np.asarray(vectors, dtype=complex)
    Gv = G_tilde_reg @ vectors
    norms = np.sqrt(np.real(np.einsum("ij,ij->j", vectors.conj(), Gv)))
    if np.any(~np.isfinite(norms)) or np.any(norms <= 0):
        raise InvalidArgumentError("Gram metric is not positive on the eigenvectors")
    return vectors / norms


def basis_identity_coordinates(basis, ds: Dataset | None = None) -> np.ndarray:
    return BasisEvaluator.from_basis(basis, ds).identity_coordinates()


def modes_from(V_norm, G_tilde_reg, coordinates) -> np.ndarray:
    """Modes ``C (V^T G)^-1`` with the plain (not conjugate) transpose.

    ``coordinates`` is the ``n x Ntilde`` matrix of identity-function inner
    products (see :func:`basis_identity_coordinates`).
    """
    C = np.asarray(coordinates)
    M = np.asarray(G_tilde_reg) @ np.asarray(V_norm)  # (V^T G)^T, G symmetric
    return solve_complex(M, C.T).T


def _stage(label, fn, *args):
    try:
        return fn(*args)
    except CLDMDError as exc:
        raise type(exc)(f"[{label}] {exc}") from exc


def decompose(ds: Dataset, basis, kernel: KernelOperator, law,
              eps: float = DEFAULT_EPS, eps_tilde: float = DEFAULT_EPS,
              matrices: OperatorMatrices | None = None) -> Decomposition:
    """Run the full decomposition pipeline.

    Parameters
    ----------
    ds : Dataset
        Open-loop trajectories with their input signals.
    basis : KernelBasis or DataCentric
        Basis of the scalar function space.
    kernel : KernelOperator
        Matrix-valued kernel; its scalar part also defines the basis space.
    law : callable
        Feedback law ``mu``; maps states (single or stacked rows) to controls.
    eps, eps_tilde : float
        Tikhonov regularization added to ``G`` and ``G_tilde``.
    matrices : OperatorMatrices, optional
        Pre-assembled matrices; skips the assembly stage.

    Raises
    ------
    SingularMatrixError, NumericFailureError
        Messages are prefixed with the failing stage.
    """
    if matrices is None:
        matrices = _stage("assemble", assemble, ds, basis, kernel, law, eps, eps_tilde)
    A = _stage("finite-rank", finite_rank_matrix, matrices)
    pairs = _stage("eigendecomposition", eig_general, A)
    G_reg = matrices.G_tilde_reg
    V = _stage("normalize", normalize_eigenvectors, pairs.vectors, G_reg)
    evaluator = BasisEvaluator.from_basis(basis, ds)
    modes = _stage("modes", modes_from, V, G_reg, evaluator.identity_coordinates())

    law_dict = law.to_dict() if hasattr(law, "to_dict") else {"type": "callable"}
    dec = Decomposition(pairs.values, V, modes, evaluator, kernel,
                        matrices.eps, matrices.eps_tilde, law_dict)
    residual = identity_residual(dec)
    diagnostics = {
        "condition": matrices.condition_numbers(),
        "identity_residual": residual,
        "backend": _backend.BACKEND,
    }
    object.__setattr__(dec, "diagnostics", diagnostics)
    return dec


def eigenfunctions_at(dec: Decomposition, x) -> np.ndarray:
    """Eigenfunction values ``phi_j(x)``; a vector for one point, rows for many."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != dec.state_dim:
        raise InvalidArgumentError(
            f"point has dimension {x.shape[-1]}, model state dimension is {dec.state_dim}")
    phi = dec.basis.evaluate(np.atleast_2d(x), dec.kernel.scalar) @ dec.V_norm
    return phi[0] if single else phi


def identity_reconstruction(dec: Decomposition, X) -> np.ndarray:
    """``sum_j xi_j phi_j(x)`` at the rows of ``X`` (complex)."""
    return eigenfunctions_at(dec, np.atleast_2d(X)) @ dec.modes.T


def identity_residual(dec: Decomposition) -> float:
    """Mean distance between ``x`` and its reconstruction over basis anchor points."""
    pts = dec.basis.points
    rec = identity_reconstruction(dec, pts)
    return float(np.mean(np.linalg.norm(rec - pts, axis=1)))


def _mode_selection(terms_abs, n_modes, eigenvalues):
    if n_modes is None or n_modes >= len(eigenvalues):
        return np.arange(len(eigenvalues))
    order = np.argsort(-terms_abs, kind="stable")
    keep = set(order[:n_modes].tolist())
    # Keep conjugate partners together so the sum stays real.
    for j in list(keep):
        if eigenvalues[j].imag != 0:
            partner = np.flatnonzero(eigenvalues == np.conj(eigenvalues[j]))
            keep.update(partner.tolist())
    return np.array(sorted(keep))


def predict_direct(dec: Decomposition, x0, times, n_modes: int | None = None) -> Prediction:
    """Trajectory ``Re sum_j xi_j phi_j(x0) exp(lambda_j t)`` on ``times``.

    ``n_modes`` keeps only the terms with the largest ``|xi_j phi_j(x0)|``
    (conjugate partners are always kept together); by default all are used.
    """
    x0 = np.asarray(x0, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0):
        raise InvalidArgumentError("times must be a sorted 1-D sequence")
    phi = eigenfunctions_at(dec, x0)
    coef = dec.modes * phi  # column j = xi_j phi_j(x0)
    sel = _mode_selection(np.linalg.norm(coef, axis=0), n_modes, dec.eigenvalues)
    growth = np.exp(np.outer(times, dec.eigenvalues[sel]))
    states = growth @ coef[:, sel].T
    imag = float(np.abs(states.imag).max(initial=0.0))
    return Prediction(times, states.real.copy(), imag)


def reconstruct_field(dec: Decomposition, x, return_imag: bool = False):
    """Closed-loop vector field ``Re sum_j lambda_j xi_j phi_j(x)``.

    Accepts one point or a matrix of points (rows). With ``return_imag`` the
    largest discarded imaginary magnitude is returned as well.
    """
    x = np.asarray(x, dtype=float)
    phi = eigenfunctions_at(dec, x)
    val = (phi * dec.eigenvalues) @ dec.modes.T
    if return_imag:
        return val.real, float(np.abs(val.imag).max(initial=0.0))
    return val.real


def predict_indirect(dec: Decomposition, x0, t_end: float, step: float = 1e-3) -> Prediction:
    """Integrate the reconstructed field with fixed-step classical RK4.

    Raises
    ------
    DivergenceError
        When the state norm exceeds 1e6. ``last_state``/``time`` hold the last
        finite state and the ``partial`` attribute the prediction so far.
    """
    x0 = np.asarray(x0, dtype=float)
    if not (step > 0 and t_end > 0):
        raise InvalidArgumentError("t_end and step must be positive")
    if step > t_end:
        raise InvalidArgumentError("step must not exceed t_end")
    n = int(round(t_end / step))
    times = step * np.arange(n + 1)
    out = np.empty((n + 1, dec.state_dim))
    out[0] = x0
    imag = 0.0

    def f(x):
        nonlocal imag
        v, im = reconstruct_field(dec, x, return_imag=True)
        imag = max(imag, im)
        return v

    x = x0.copy()
    for k in range(n):
        k1 = f(x)
        k2 = f(x + 0.5 * step * k1)
        k3 = f(x + 0.5 * step * k2)
        k4 = f(x + step * k3)
        x_new = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > DIVERGENCE_NORM:
            err = DivergenceError(
                f"indirect prediction diverged at t={times[k + 1]:.6g}",
                last_state=x.copy(), time=float(times[k]))
            err.partial = Prediction(times[:k + 1], out[:k + 1].copy(), imag)
            raise err
        x = x_new
        out[k + 1] = x
    return Prediction(times, out, imag)


def relative_rms(pred, truth, return_flags: bool = False):
    """Per-dimension RMS error divided by the RMS of the truth.

    Where the truth RMS is below 1e-12 the absolute RMS error is reported and
    the corresponding flag is set.
    """
    pt = pred.times if isinstance(pred, Prediction) else None
    tt = truth.times if isinstance(truth, Prediction) else None
    ps = np.asarray(pred.states if isinstance(pred, Prediction) else pred, dtype=float)
    ts = np.asarray(truth.states if isinstance(truth, Prediction) else truth, dtype=float)
    if ps.shape != ts.shape:
        raise InvalidArgumentError(f"shape mismatch: {ps.shape} vs {ts.shape}")
    if pt is not None and tt is not None and (
            len(pt) != len(tt) or not np.allclose(pt, tt, rtol=0, atol=1e-9)):
        raise InvalidArgumentError("prediction and truth use different time grids")
    num = np.sqrt(np.mean((ps - ts) ** 2, axis=0))
    den = np.sqrt(np.mean(ts ** 2, axis=0))
    flags = den < 1e-12
    out = np.where(flags, num, num / np.where(flags, 1.0, den))
    return (out, flags) if return_flags else out


# -- serialization ----------------------------------------------------------------

def _cplx(a):
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _uncplx(d):
    return np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)


def decomposition_to_dict(dec: Decomposition) -> dict:
    return {
        "format": "cldmd-decomposition",
        "version": FORMAT_VERSION,
        "state_dim": dec.state_dim,
        "eigenvalues": _cplx(dec.eigenvalues),
        "V_norm": _cplx(dec.V_norm),
        "modes": _cplx(dec.modes),
        "basis": dec.basis.to_dict(),
        "kernel": dec.kernel.scalar.to_dict(),
        "operator": dec.kernel.to_dict(),
        "channels": dec.kernel.channels,
        "eps": dec.eps,
        "eps_tilde": dec.eps_tilde,
        "feedback": dec.law,
        "diagnostics": dec.diagnostics,
    }


def decomposition_from_dict(d: dict) -> Decomposition:
    try:
        if d.get("format") != "cldmd-decomposition":
            raise SchemaError("not a decomposition file")
        scalar = GaussianKernel(float(d["kernel"]["width"]))
        op = d["operator"]
        matrix = None if op.get("type") == "diagonal" else np.array(op["A"], dtype=float)
        kernel = KernelOperator(scalar, int(d["channels"]), matrix)
        return Decomposition(
            _uncplx(d["eigenvalues"]),
            _uncplx(d["V_norm"]).reshape(len(d["V_norm"]["re"]), -1),
            _uncplx(d["modes"]).reshape(int(d["state_dim"]), -1),
            BasisEvaluator.from_dict(d["basis"]),
            kernel,
            float(d["eps"]),
            float(d["eps_tilde"]),
            d.get("feedback", {}),
            d.get("diagnostics", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed decomposition: {exc}") from exc


def save_decomposition(dec: Decomposition, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(decomposition_to_dict(dec), indent=1) + "\n")
    return path


def load_decomposition(path) -> Decomposition:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return decomposition_from_dict(d)


def feedback_from_dict(d: dict):
    if d.get("type") == "linear":
        return LinearGain(np.array(d["gain"], dtype=float))
    raise SchemaError(f"feedback law of type {d.get('type')!r} cannot be reconstructed")
