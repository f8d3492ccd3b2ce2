"""Experiment configuration: loading, validation and dataset generation.

A configuration is a JSON document (shipped presets use the ``.cfg``
extension). Sections not given fall back to :data:`DEFAULTS`; nested
dictionaries are merged key by key.

Example
-------
>>> cfg = load_config("duffing")
>>> cfg["kernel"]["width"]
15.0
"""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .data import DataCentric, Dataset, KernelBasis, LinearGain
from .exceptions import InvalidArgumentError, SchemaError
from .kernels import GaussianKernel, KernelOperator
from . import systems

__all__ = [
    "DEFAULTS",
    "PRESETS",
    "load_config",
    "merge_config",
    "validate_config",
    "build_system",
    "initial_conditions",
    "build_signals",
    "generate_dataset",
    "build_basis",
    "build_kernel",
    "build_feedback",
]

PRESETS = ("duffing", "twolink", "linear_oracle",
           "duffing_k1000", "twolink_dense")

DEFAULTS = {
    "name": "custom",
    "system": {"name": "duffing"},
    "initial_conditions": {"type": "grid", "per_side": 15, "half_width": 1.5},
    "signal": {"type": "sinusoids", "seed": 0, "terms": 3, "amplitude": 1.0,
               "freq_hz": [0.5, 2.5]},
    "T": 1.0,
    "sample_hz": 20.0,
    "internal_step": 1e-3,
    "kernel": {"type": "gaussian", "width": 15.0},
    "operator": {"type": "diagonal"},
    "basis": {"type": "data_centric", "indices": "all"},
    "eps": 1e-6,
    "eps_tilde": 1e-6,
    "feedback": {"gain": [[-2.0, -2.0]]},
    "prediction": {"x0": [1.0, 1.0], "T": 1.0, "step": 1e-3, "mode": "both"},
    "field": {"per_side": 50, "half_width": 1.5},
}


def merge_config(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _read_json(text, origin):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{origin}: invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise SchemaError(f"{origin}: top level must be an object")
    return d


def load_config(source) -> dict:
    """Load a preset by name or a config file by path and validate it."""
    if isinstance(source, dict):
        raw = source
    elif str(source) in PRESETS:
        text = resources.files("cldmd.presets").joinpath(f"{source}.cfg").read_text()
        raw = _read_json(text, source)
    else:
        path = Path(source)
        if not path.is_file():
            raise SchemaError(f"config {source!r} is neither a preset nor a file "
                              f"(presets: {', '.join(PRESETS)})")
        raw = _read_json(path.read_text(), path)
    cfg = merge_config(DEFAULTS, raw)
    validate_config(cfg)
    return cfg


def _positive(cfg, *keys):
    node = cfg
    for k in keys:
        node = node[k]
    try:
        ok = float(node) > 0
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise SchemaError(f"config field {'.'.join(keys)} must be a positive number")


def validate_config(cfg: dict):
    """Check types and ranges; raises :class:`SchemaError`."""
    try:
        for keys in (("T",), ("sample_hz",), ("internal_step",), ("kernel", "width"),
                     ("prediction", "T"), ("prediction", "step"),
                     ("field", "half_width")):
            _positive(cfg, *keys)
        for keys in (("eps",), ("eps_tilde",)):
            if float(cfg[keys[0]]) < 0:
                raise SchemaError(f"config field {keys[0]} must be nonnegative")
        if cfg["prediction"]["mode"] not in ("direct", "indirect", "both"):
            raise SchemaError("prediction.mode must be direct, indirect or both")
        if int(cfg["field"]["per_side"]) < 1:
            raise SchemaError("field.per_side must be at least 1")
        if cfg["kernel"].get("type", "gaussian") != "gaussian":
            raise SchemaError("only gaussian kernels are supported")
        if cfg["operator"].get("type") not in ("diagonal", "matrix"):
            raise SchemaError("operator.type must be diagonal or matrix")
        if cfg["basis"]["type"] not in ("kernel", "data_centric"):
            raise SchemaError("basis.type must be kernel or data_centric")
        sysm = build_system(cfg)
        gain = np.asarray(cfg["feedback"]["gain"], dtype=float)
        if gain.shape != (sysm.control_dim, sysm.state_dim):
            raise SchemaError(
                f"feedback gain has shape {gain.shape}; system {sysm.name} needs "
                f"({sysm.control_dim}, {sysm.state_dim})")
        if len(cfg["prediction"]["x0"]) != sysm.state_dim:
            raise SchemaError(f"prediction.x0 must have {sysm.state_dim} entries")
        systems._substeps(float(cfg["sample_hz"]), float(cfg["internal_step"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"invalid config: {exc}") from exc


def build_system(cfg) -> systems.ControlAffineSystem:
    spec = dict(cfg["system"])
    name = spec.pop("name")
    try:
        return systems.get_system(name, **spec)
    except InvalidArgumentError as exc:
        raise SchemaError(str(exc)) from exc


def initial_conditions(cfg) -> np.ndarray:
    ic = cfg["initial_conditions"]
    dim = build_system(cfg).state_dim
    kind = ic.get("type")
    if kind == "grid":
        return systems.grid_initial_conditions(int(ic["per_side"]),
                                               float(ic["half_width"]), dim)
    if kind == "halton":
        return systems.halton_points(int(ic["count"]), dim, float(ic["half_width"]))
    if kind == "points":
        pts = np.atleast_2d(np.asarray(ic["points"], dtype=float))
        if pts.shape[1] != dim:
            raise SchemaError(f"initial points must have {dim} columns")
        return pts
    raise SchemaError(f"unknown initial_conditions.type {kind!r}")


def build_signals(cfg, count: int) -> list:
    sig = cfg["signal"]
    m = build_system(cfg).control_dim
    kind = sig.get("type")
    if kind == "sinusoids":
        return [systems.random_sinusoids(m, int(sig["seed"]), i, int(sig["terms"]),
                                         float(sig["amplitude"]), tuple(sig["freq_hz"]))
                for i in range(count)]
    if kind == "zero":
        return [systems.ZeroSignal(m)] * count
    raise SchemaError(f"unknown signal.type {kind!r}")


def generate_dataset(cfg) -> Dataset:
    """Simulate the open-loop training trajectories described by ``cfg``."""
    sysm = build_system(cfg)
    X0 = initial_conditions(cfg)
    trajs = systems.simulate_openloop_batch(
        sysm.rhs, X0, build_signals(cfg, len(X0)), float(cfg["T"]),
        float(cfg["sample_hz"]), float(cfg["internal_step"]))
    return Dataset.from_trajectories(trajs)


def build_kernel(cfg, control_dim: int) -> KernelOperator:
    scalar = GaussianKernel(float(cfg["kernel"]["width"]))
    op = cfg.get("operator", {"type": "diagonal"})
    if op.get("type") == "matrix":
        try:
            return KernelOperator(scalar, control_dim + 1, np.asarray(op["A"], dtype=float))
        except InvalidArgumentError as exc:
            raise SchemaError(f"operator.A: {exc}") from exc
    return KernelOperator.diagonal(scalar, control_dim)


def build_basis(cfg, ds: Dataset):
    spec = cfg["basis"]
    if spec["type"] == "data_centric":
        idx = spec.get("indices", "all")
        return DataCentric.all(ds) if idx == "all" else DataCentric(tuple(int(i) for i in idx))
    centers = spec.get("centers", "initial_conditions")
    if centers == "initial_conditions":
        return KernelBasis(initial_conditions(cfg))
    if isinstance(centers, dict):
        return KernelBasis(initial_conditions({**cfg, "initial_conditions": centers}))
    return KernelBasis(np.atleast_2d(np.asarray(centers, dtype=float)))


def build_feedback(cfg) -> LinearGain:
    return LinearGain(np.asarray(cfg["feedback"]["gain"], dtype=float))
