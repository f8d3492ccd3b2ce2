"""Trajectory datasets, feedback laws and basis selections.

On disk a dataset is a directory of CSV files (header ``t,x1..xn,u1..um``,
one row per sample) plus a JSON manifest::

    {"state_dim": 2, "control_dim": 1, "files": ["traj_000.csv", ...]}

An optional ``"dt"`` list (one entry per file) records the exact sample
period so that a save/load round trip is bit-exact.

Sampling must be uniform; non-uniform grids are rejected, not resampled.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidArgumentError, SchemaError
from .numerics import QuadratureWeights, simpson_weights

__all__ = [
    "SampledTrajectory",
    "Dataset",
    "LinearGain",
    "CallableFeedback",
    "KernelBasis",
    "DataCentric",
    "evaluate_feedback",
    "load_dataset",
    "save_dataset",
]

DT_JITTER = 1e-6


@dataclass(frozen=True)
class SampledTrajectory:
    """A uniformly sampled state path together with the input that drove it.

    ``states`` is ``N x n`` and ``controls`` is ``N x m``; row ``k`` is the
    sample at time ``t0 + k*dt``.
    """

    t0: float
    dt: float
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float, ndmin=2)
        controls = np.array(self.controls, dtype=float)
        if controls.ndim == 1:
            controls = controls[:, None]
        if states.ndim != 2 or controls.ndim != 2:
            raise InvalidArgumentError("states and controls must be 2-D arrays")
        if states.shape[0] != controls.shape[0]:
            raise InvalidArgumentError(
                f"{states.shape[0]} state rows but {controls.shape[0]} control rows")
        if states.shape[0] < 2:
            raise InvalidArgumentError("a trajectory needs at least 2 samples")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        for name, arr in (("states", states), ("controls", controls)):
            bad = np.argwhere(~np.isfinite(arr))
            if bad.size:
                raise InvalidArgumentError(
                    f"non-finite {name} entry at row {bad[0, 0]}")
        states.flags.writeable = False
        controls.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def quadrature(self) -> QuadratureWeights:
        return simpson_weights(self.n_samples, self.dt)

    def __eq__(self, other):
        if not isinstance(other, SampledTrajectory):
            return NotImplemented
        return (self.t0 == other.t0 and self.dt == other.dt
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.controls, other.controls))

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    trajectories: tuple
    state_dim: int
    control_dim: int

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if len(trajs) == 0:
            raise SchemaError("a dataset needs at least one trajectory")
        for i, tr in enumerate(trajs):
            if tr.states.shape[1] != self.state_dim:
                raise SchemaError(
                    f"trajectory {i} has state dimension {tr.states.shape[1]}, "
                    f"expected {self.state_dim}")
            if tr.controls.shape[1] != self.control_dim:
                raise SchemaError(
                    f"trajectory {i} has control dimension {tr.controls.shape[1]}, "
                    f"expected {self.control_dim}")
        object.__setattr__(self, "trajectories", trajs)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[SampledTrajectory]) -> "Dataset":
        trajectories = tuple(trajectories)
        if not trajectories:
            raise SchemaError("a dataset needs at least one trajectory")
        first = trajectories[0]
        return cls(trajectories, first.states.shape[1], first.controls.shape[1])

    def __len__(self):
        return len(self.trajectories)

    def __getitem__(self, i):
        return self.trajectories[i]

    def __iter__(self):
        return iter(self.trajectories)

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.trajectories[i] for i in indices),
                       self.state_dim, self.control_dim)


# -- feedback laws ------------------------------------------------------------

@dataclass(frozen=True)
class LinearGain:
    """State feedback ``mu(x) = gain @ x``."""

    gain: np.ndarray

    def __post_init__(self):
        gain = np.array(self.gain, dtype=float, ndmin=2)
        if gain.ndim != 2 or not np.all(np.isfinite(gain)):
            raise InvalidArgumentError("gain must be a finite m x n matrix")
        gain.flags.writeable = False
        object.__setattr__(self, "gain", gain)

    @property
    def control_dim(self) -> int:
        return self.gain.shape[0]

    @property
    def state_dim(self) -> int:
        return self.gain.shape[1]

    def __call__(self, X) -> np.ndarray:
        """Evaluate at a single state or at each row of a state matrix."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.state_dim:
            raise InvalidArgumentError(
                f"state has dimension {X.shape[-1]}, gain expects {self.state_dim}")
        return X @ self.gain.T

    def to_dict(self):
        return {"type": "linear", "gain": self.gain.tolist()}


@dataclass(frozen=True)
class CallableFeedback:
    """Arbitrary feedback supplied by embedding code.

    ``func`` maps a state vector of length ``state_dim`` to a control vector of
    length ``control_dim``. It cannot be serialized.
    """

    func: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    control_dim: int

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.state_dim:
            raise InvalidArgumentError(
                f"state has dimension {X.shape[-1]}, law expects {self.state_dim}")
        if X.ndim == 1:
            return np.asarray(self.func(X), dtype=float).reshape(self.control_dim)
        return np.array([np.asarray(self.func(x), dtype=float).reshape(self.control_dim)
                         for x in X]).reshape(len(X), self.control_dim)

    def to_dict(self):
        return {"type": "callable"}


def evaluate_feedback(law, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"x must be a vector, got shape {x.shape}")
    return np.atleast_1d(law(x))


# -- basis selections -----------------------------------------------------------

@dataclass(frozen=True)
class KernelBasis:
    """Scalar kernel functions centered at the rows of ``centers``."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float, ndmin=2)
        if c.ndim != 2 or c.shape[0] < 1:
            raise InvalidArgumentError("centers must be a non-empty 2-D array")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("centers must be finite")
        if len(c) > 1:
            d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=-1)
            d2[np.diag_indices(len(c))] = np.inf
            if d2.min() <= 0:
                i, j = np.unravel_index(np.argmin(d2), d2.shape)
                raise InvalidArgumentError(f"centers {i} and {j} coincide")
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)

    def __len__(self):
        return self.centers.shape[0]

    def to_dict(self):
        return {"type": "kernel", "centers": self.centers.tolist()}


@dataclass(frozen=True)
class DataCentric:
    """Occupation kernels of the selected dataset trajectories."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise InvalidArgumentError("at least one trajectory index is required")
        if len(set(idx)) != len(idx):
            raise InvalidArgumentError("trajectory indices must be unique")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def all(cls, ds: Dataset) -> "DataCentric":
        return cls(tuple(range(len(ds))))

    def validate(self, ds: Dataset):
        bad = [i for i in self.indices if not 0 <= i < len(ds)]
        if bad:
            raise InvalidArgumentError(
                f"indices {bad} outside dataset of {len(ds)} trajectories")

    def __len__(self):
        return len(self.indices)

    def to_dict(self):
        return {"type": "data_centric", "indices": list(self.indices)}


# -- file I/O -----------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _read_trajectory(path: Path, n: int, m: int, dt_hint=None) -> SampledTrajectory:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read trajectory file {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path.name}: empty file")
    expected = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    header = [h.strip() for h in rows[0]]
    if header != expected:
        raise SchemaError(f"{path.name}: header {header} does not match {expected}")
    body = rows[1:]
    if len(body) < 2:
        raise SchemaError(f"{path.name}: needs at least 2 samples, found {len(body)}")
    data = np.empty((len(body), 1 + n + m))
    for r, row in enumerate(body):
        if len(row) != 1 + n + m:
            raise SchemaError(f"{path.name}: row {r} has {len(row)} columns")
        try:
            data[r] = [float(v) for v in row]
        except ValueError as exc:
            raise SchemaError(f"{path.name}: row {r}: {exc}") from exc
        if not np.all(np.isfinite(data[r])):
            raise SchemaError(f"{path.name}: non-finite value in row {r}")
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if not dt > 0:
        raise SchemaError(f"{path.name}: time column is not increasing")
    steps = np.diff(t)
    jitter = np.abs(steps - dt).max() / dt
    if jitter > DT_JITTER:
        r = int(np.argmax(np.abs(steps - dt))) + 1
        raise SchemaError(
            f"{path.name}: non-uniform time grid near row {r} "
            f"(relative jitter {jitter:.2e})")
    if dt_hint is not None:
        # Exact step recorded by the writer; the time column only rounds it.
        if abs(dt_hint - dt) > DT_JITTER * dt:
            raise SchemaError(f"{path.name}: manifest dt {dt_hint} disagrees with time column")
        dt = float(dt_hint)
    return SampledTrajectory(t[0], dt, data[:, 1:1 + n], data[:, 1 + n:])


def load_dataset(manifest_path) -> Dataset:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: invalid JSON: {exc}") from exc
    try:
        n = int(manifest["state_dim"])
        m = int(manifest["control_dim"])
        files = list(manifest["files"])
        dts = manifest.get("dt")
        dts = [None] * len(files) if dts is None else [float(v) for v in dts]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{manifest_path}: malformed manifest ({exc})") from exc
    if not files:
        raise SchemaError(f"{manifest_path}: no trajectory files listed")
    if len(dts) != len(files):
        raise SchemaError(f"{manifest_path}: 'dt' list length does not match 'files'")
    root = manifest_path.parent
    trajs = []
    for name, dt in zip(files, dts):
        path = root / name
        if not path.exists():
            raise FileNotFoundError(f"trajectory file {path} listed in manifest is missing")
        trajs.append(_read_trajectory(path, n, m, dt))
    return Dataset(tuple(trajs), n, m)


def save_dataset(ds: Dataset, directory, prefix: str = "traj") -> Path:
    """Write one CSV per trajectory plus ``manifest.json``; returns the manifest path."""
    if len(ds.trajectories) == 0:
        raise SchemaError("cannot save an empty dataset")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, m = ds.state_dim, ds.control_dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    width = max(3, len(str(len(ds) - 1)))
    files = []
    for i, tr in enumerate(ds.trajectories):
        name = f"{prefix}_{i:0{width}d}.csv"
        with open(directory / name, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for t, x, u in zip(tr.times, tr.states, tr.controls):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in x] + [_fmt(v) for v in u])
        files.append(name)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(
        {"state_dim": n, "control_dim": m, "files": files,
         "dt": [tr.dt for tr in ds.trajectories]}, indent=2) + "\n")
    return manifest
