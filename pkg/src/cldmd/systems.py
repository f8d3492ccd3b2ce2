"""Benchmark control-affine systems, excitation signals and RK4 simulators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .data import SampledTrajectory
from .exceptions import DivergenceError, InvalidArgumentError

__all__ = [
    "ControlAffineSystem",
    "TwoLinkParams",
    "duffing_rhs",
    "twolink_rhs",
    "linear_rhs",
    "duffing_system",
    "twolink_system",
    "linear_system",
    "get_system",
    "SumOfSinusoids",
    "PiecewiseConstant",
    "ZeroSignal",
    "eval_signal",
    "random_sinusoids",
    "simulate_openloop",
    "simulate_openloop_batch",
    "simulate_closedloop",
    "grid_initial_conditions",
    "halton_points",
]

DIVERGENCE_NORM = 1e6


# -- dynamics -----------------------------------------------------------------
# Right-hand sides accept a single state or a stack of states along the
# leading axis, so simulators can advance a whole batch at once.

def duffing_rhs(x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    u1 = u.reshape(x.shape[:-1] + (-1,))[..., 0]
    return np.stack([x2, x1 - x1 ** 3 + (2.0 + np.sin(x1)) * u1], axis=-1)


@dataclass(frozen=True)
class TwoLinkParams:
    p1: float = 3.473
    p2: float = 0.196
    p3: float = 0.242
    fd1: float = 5.3
    fd2: float = 1.1
    fs1: float = 8.45
    fs2: float = 2.35

    def inertia(self, q2):
        c2 = np.cos(q2)
        return np.array([[self.p1 + 2 * self.p3 * c2, self.p2 + self.p3 * c2],
                         [self.p2 + self.p3 * c2, self.p2]])


def twolink_rhs(x, u, p: TwoLinkParams = TwoLinkParams()):
    """Planar two-link arm, state ``(q1, q2, dq1, dq2)``, input joint torques.

    ``ddq = M(q)^-1 (tau - V_m(q, dq) dq - F(dq))`` with the 2x2 inverse
    written out.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(u, dtype=float).reshape(x.shape[:-1] + (2,))
    q2, dq1, dq2 = x[..., 1], x[..., 2], x[..., 3]
    c2, s2 = np.cos(q2), np.sin(q2)
    m11 = p.p1 + 2 * p.p3 * c2
    m12 = p.p2 + p.p3 * c2
    m22 = p.p2
    det = m11 * m22 - m12 * m12
    if np.any(det < 1e-9):
        raise InvalidArgumentError(f"inertia matrix singular (min det={np.min(det)})")
    v1 = p.p3 * s2 * dq2 * dq1 - p.p3 * s2 * (dq1 + dq2) * dq2
    v2 = p.p3 * s2 * dq1 * dq1
    f1 = p.fd1 * dq1 + p.fs1 * np.tanh(dq1)
    f2 = p.fd2 * dq2 + p.fs2 * np.tanh(dq2)
    r1 = tau[..., 0] - v1 - f1
    r2 = tau[..., 1] - v2 - f2
    ddq1 = (m22 * r1 - m12 * r2) / det
    ddq2 = (-m12 * r1 + m11 * r2) / det
    return np.stack([dq1, dq2, ddq1, ddq2], axis=-1)


def linear_rhs(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)

    def rhs(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(x.shape[:-1] + (B.shape[1],))
        return x @ A.T + u @ B.T

    return rhs


@dataclass(frozen=True)
class ControlAffineSystem:
    name: str
    state_dim: int
    control_dim: int
    rhs: Callable
    info: dict = field(default_factory=dict)

    def closed_loop_field(self, law, X):
        """True closed-loop vector field at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.rhs(X, np.asarray(law(X)).reshape(len(X), self.control_dim))


def duffing_system() -> ControlAffineSystem:
    return ControlAffineSystem("duffing", 2, 1, duffing_rhs)


def twolink_system(p: TwoLinkParams = TwoLinkParams()) -> ControlAffineSystem:
    return ControlAffineSystem("twolink", 4, 2, lambda x, u: twolink_rhs(x, u, p))


LINEAR_A = [[0.0, 1.0], [-2.0, -3.0]]
LINEAR_B = [[0.0], [1.0]]


def linear_system(A=LINEAR_A, B=LINEAR_B) -> ControlAffineSystem:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    return ControlAffineSystem("linear", A.shape[0], B.shape[1], linear_rhs(A, B),
                               {"A": A.tolist(), "B": B.tolist()})


def get_system(name: str, **kwargs) -> ControlAffineSystem:
    factories = {"duffing": duffing_system, "twolink": twolink_system,
                 "linear": linear_system}
    try:
        return factories[name](**kwargs)
    except KeyError:
        raise InvalidArgumentError(
            f"unknown system {name!r}; choose from {sorted(factories)}") from None


# -- excitation signals -------------------------------------------------------------

def _terms(a, m):
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, 1) if a.ndim <= 1 and m == 1 else np.atleast_2d(a)


@dataclass(frozen=True)
class SumOfSinusoids:
    """``u_d(t) = sum_k a[k, d] sin(w[k, d] t + phi[k, d])``, frequencies in rad/s."""

    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=float)
        m = 1 if a.ndim <= 1 else a.shape[1]
        a, w, ph = (_terms(v, m) for v in (self.amplitudes, self.frequencies, self.phases))
        if not (a.shape == w.shape == ph.shape):
            raise InvalidArgumentError("amplitudes, frequencies and phases must align")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", ph)

    @property
    def control_dim(self):
        return self.amplitudes.shape[1]

    def __call__(self, t):
        return np.sum(self.amplitudes * np.sin(self.frequencies * t + self.phases), axis=0)


@dataclass(frozen=True)
class PiecewiseConstant:
    levels: np.ndarray
    dwell: float

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        lv = lv.reshape(-1, 1) if lv.ndim == 1 else lv
        if self.dwell <= 0:
            raise InvalidArgumentError("dwell must be positive")
        object.__setattr__(self, "levels", lv)

    @property
    def control_dim(self):
        return self.levels.shape[1]

    def __call__(self, t):
        k = min(int(np.floor(t / self.dwell)), len(self.levels) - 1)
        return self.levels[k].copy()


@dataclass(frozen=True)
class ZeroSignal:
    control_dim: int = 1

    def __call__(self, t):
        return np.zeros(self.control_dim)


def eval_signal(sig, t: float) -> np.ndarray:
    if t < 0:
        raise InvalidArgumentError("signal time must be nonnegative")
    return np.atleast_1d(sig(t))


def random_sinusoids(control_dim: int, seed: int, index: int, terms: int = 3,
                     amplitude: float = 1.0, freq_hz=(0.5, 2.5)) -> SumOfSinusoids:
    """Reproducible random excitation for trajectory ``index``.

    Amplitudes are uniform in ``[-amplitude, amplitude]``, frequencies uniform
    in ``freq_hz`` (converted to rad/s), phases uniform in ``[0, 2 pi)``.
    """
    rng = np.random.default_rng([int(seed), int(index)])
    shape = (terms, control_dim)
    a = rng.uniform(-amplitude, amplitude, shape)
    w = 2 * np.pi * rng.uniform(freq_hz[0], freq_hz[1], shape)
    ph = rng.uniform(0.0, 2 * np.pi, shape)
    return SumOfSinusoids(a, w, ph)


# -- simulation ---------------------------------------------------------------------

def _substeps(sample_hz, internal_step):
    period = 1.0 / sample_hz
    ratio = period / internal_step
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise InvalidArgumentError(
            f"internal step {internal_step} does not divide sample period {period}")
    return n, period / n


def _signal_bank(signals):
    """Vectorize a list of signals into ``t -> (B, m)``."""
    if all(isinstance(s, SumOfSinusoids) for s in signals) and \
            len({s.amplitudes.shape for s in signals}) == 1:
        a = np.stack([s.amplitudes for s in signals])
        w = np.stack([s.frequencies for s in signals])
        ph = np.stack([s.phases for s in signals])
        return lambda t: np.sum(a * np.sin(w * t + ph), axis=1)
    return lambda t: np.stack([eval_signal(s, t) for s in signals])


def _simulate_batch(rhs, X0, control, T, sample_hz, internal_step):
    """RK4 for a batch of states; ``control(t, X)`` gives the stage inputs.

    Returns states ``(B, N, n)``, controls ``(B, N, m)``, the sample period
    and a list of ``(index, time, last_state)`` for trajectories whose norm
    exceeded the divergence bound. Diverged rows stop advancing.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    sub, h = _substeps(sample_hz, internal_step)
    n_samples = int(round(T * sample_hz)) + 1
    if n_samples < 2:
        raise InvalidArgumentError("duration shorter than one sample period")
    period = 1.0 / sample_hz
    U = np.asarray(control(0.0, X), dtype=float).reshape(len(X), -1)
    states = np.empty((len(X), n_samples, X.shape[1]))
    controls = np.empty((len(X), n_samples, U.shape[1]))
    states[:, 0], controls[:, 0] = X, U
    alive = np.ones(len(X), dtype=bool)
    failures = []
    for s in range(1, n_samples):
        t_base = (s - 1) * period
        for j in range(sub):
            t = t_base + j * h
            k1 = rhs(X, control(t, X))
            Xa = X + 0.5 * h * k1
            k2 = rhs(Xa, control(t + 0.5 * h, Xa))
            Xb = X + 0.5 * h * k2
            k3 = rhs(Xb, control(t + 0.5 * h, Xb))
            Xc = X + h * k3
            k4 = rhs(Xc, control(t + h, Xc))
            X_new = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            bad = alive & ~(np.all(np.isfinite(X_new), axis=1)
                            & (np.linalg.norm(X_new, axis=1) <= DIVERGENCE_NORM))
            for i in np.flatnonzero(bad):
                failures.append((int(i), float(t), X[i].copy()))
            alive &= ~bad
            X = np.where(alive[:, None], X_new, X)
        states[:, s] = X
        controls[:, s] = np.asarray(control(s * period, X)).reshape(len(X), -1)
    return states, controls, period, failures


def _raise_failures(failures):
    i, t, x = failures[0]
    err = DivergenceError(
        f"{len(failures)} trajectories diverged (first: index {i} near t={t:.6g})",
        last_state=x, time=t)
    err.failures = failures
    raise err


def simulate_openloop(rhs, x0, sig, T: float, sample_hz: float,
                      internal_step: float) -> SampledTrajectory:
    """Simulate under a time signal with RK4 and record at ``sample_hz``.

    The input is evaluated at each RK4 stage time and recorded on the same grid
    as the states.
    """
    return simulate_openloop_batch(rhs, [x0], [sig], T, sample_hz, internal_step)[0]


def simulate_openloop_batch(rhs, X0, signals, T: float, sample_hz: float,
                            internal_step: float) -> list:
    """:func:`simulate_openloop` for many initial conditions at once."""
    X0 = np.array(X0, dtype=float, ndmin=2)
    if len(signals) != len(X0):
        raise InvalidArgumentError("need one signal per initial condition")
    bank = _signal_bank(signals)
    states, controls, period, failures = _simulate_batch(
        rhs, X0, lambda t, X: bank(t), T, sample_hz, internal_step)
    if failures:
        _raise_failures(failures)
    return [SampledTrajectory(0.0, period, x, u) for x, u in zip(states, controls)]


def simulate_closedloop(rhs, x0, law, T: float, sample_hz: float,
                        internal_step: float) -> SampledTrajectory:
    """Simulate under state feedback ``u = law(x)`` evaluated at every stage."""
    states, controls, period, failures = _simulate_batch(
        rhs, [x0], lambda t, X: law(X), T, sample_hz, internal_step)
    if failures:
        _raise_failures(failures)
    return SampledTrajectory(0.0, period, states[0], controls[0])


# -- initial conditions ------------------------------------------------------------

def grid_initial_conditions(per_side: int, half_width: float, dim: int) -> np.ndarray:
    """Regular ``per_side^dim`` grid on ``[-half_width, half_width]^dim``.

    Points are ordered with the last coordinate varying fastest.
    """
    if per_side < 2:
        raise InvalidArgumentError("per_side must be at least 2")
    axis = np.linspace(-half_width, half_width, per_side)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def halton_points(count: int, dim: int, half_width: float) -> np.ndarray:
    """Unscrambled Halton points (bases 2, 3, 5, ...), skipping index 0."""
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    if not 1 <= dim <= 6:
        raise InvalidArgumentError("dim must be between 1 and 6")
    sampler = qmc.Halton(d=dim, scramble=False)
    sampler.fast_forward(1)
    unit = sampler.random(count)
    return (2.0 * unit - 1.0) * half_width
