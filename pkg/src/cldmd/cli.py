"""Command-line front end.

Subcommands::

    cldmd simulate  --preset duffing --out run/
    cldmd decompose --config run/config.json --out run/
    cldmd predict   run/decomposition.json --mode both --x0 1,1 --compare-truth duffing
    cldmd field     run/decomposition.json --grid 50 --compare-truth duffing

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import _backend, core, experiment, systems
from .data import Dataset, load_dataset, save_dataset
from .exceptions import (DivergenceError, InvalidArgumentError, NumericFailureError,
                         SchemaError, SingularMatrixError)
from .gramian import assemble, dump_matrices

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGENCE = 0, 2, 3, 4


# -- helpers ----------------------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _matrix(text):
    """``"a,b;c,d"`` -> ``[[a, b], [c, d]]``."""
    return [_floats(row) for row in text.split(";")]


def _write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    return Path(path)


def _write_prediction(path, pred: core.Prediction):
    n = pred.states.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    return _write_csv(path, header, np.column_stack([pred.times, pred.states]))


def _config(args) -> dict:
    source = getattr(args, "preset", None) or args.config
    cfg = experiment.load_config(source) if source else experiment.load_config({})
    override = {}
    if args.seed is not None:
        override["signal"] = {"seed": args.seed}
    for name in ("system", "T", "hz", "internal_step", "grid", "half_width",
                 "width", "eps", "eps_tilde", "basis", "gain"):
        if getattr(args, name, None) is None:
            continue
        value = getattr(args, name)
        if name == "system":
            override["system"] = {"name": value}
            if getattr(args, "gain", None) is None and value != cfg["system"]["name"]:
                sysm = systems.get_system(value)
                cfg["feedback"]["gain"] = np.zeros((sysm.control_dim, sysm.state_dim)).tolist()
                cfg["prediction"]["x0"] = [0.0] * sysm.state_dim
        elif name == "hz":
            override["sample_hz"] = value
        elif name == "grid":
            override.setdefault("initial_conditions", {}).update(
                {"type": "grid", "per_side": value})
        elif name == "half_width":
            override.setdefault("initial_conditions", {})["half_width"] = value
        elif name == "width":
            override["kernel"] = {"width": value}
        elif name == "basis":
            override["basis"] = {"type": value}
        elif name == "gain":
            override["feedback"] = {"gain": value}
        else:
            override[name] = value
    cfg = experiment.merge_config(cfg, override)
    if cfg["system"]["name"] != "linear":
        cfg["system"] = {"name": cfg["system"]["name"]}
    experiment.validate_config(cfg)
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _truth_system(name):
    """System from a preset/config name or a bare system name."""
    try:
        return systems.get_system(name)
    except InvalidArgumentError:
        return experiment.build_system(experiment.load_config(name))


def _report(msg):
    print(msg, file=sys.stderr)


# -- commands ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out(args)
    sysm = experiment.build_system(cfg)
    X0 = experiment.initial_conditions(cfg)
    signals = experiment.build_signals(cfg, len(X0))
    log = {"config": cfg, "count": len(X0), "system": sysm.name,
           "seeds": {"signal": cfg["signal"].get("seed")}, "failures": []}
    try:
        trajs = systems.simulate_openloop_batch(
            sysm.rhs, X0, signals, float(cfg["T"]), float(cfg["sample_hz"]),
            float(cfg["internal_step"]))
    except DivergenceError as exc:
        log["failures"] = [{"index": i, "time": t, "last_state": x.tolist()}
                           for i, t, x in getattr(exc, "failures", [])]
        _write_json(out / "generation_log.json", log)
        raise
    manifest = save_dataset(Dataset.from_trajectories(trajs), out / "dataset")
    _write_json(out / "config.json", cfg)
    _write_json(out / "generation_log.json", log)
    print(manifest)
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _config(args)
    out = _out(args)
    if args.dataset:
        ds = load_dataset(args.dataset)
    else:
        ds = experiment.generate_dataset(cfg)
    basis = experiment.build_basis(cfg, ds)
    kernel = experiment.build_kernel(cfg, ds.control_dim)
    law = experiment.build_feedback(cfg)
    if law.state_dim != ds.state_dim or law.control_dim != ds.control_dim:
        raise SchemaError(f"feedback gain shape {law.gain.shape} does not match the dataset "
                          f"({ds.control_dim}, {ds.state_dim})")
    matrices = core._stage("assemble", assemble, ds, basis, kernel, law,
                           float(cfg["eps"]), float(cfg["eps_tilde"]))
    if args.dump_matrices:
        dump_matrices(matrices, args.dump_matrices)
    dec = core.decompose(ds, basis, kernel, law, matrices=matrices)
    path = core.save_decomposition(dec, out / "decomposition.json")
    lam = dec.eigenvalues
    summary = {
        "n_trajectories": len(ds),
        "rank": dec.rank,
        "basis": cfg["basis"]["type"],
        "eigenvalues": [{"re": float(v.real), "im": float(v.imag)} for v in lam],
        "gram_condition": dec.diagnostics["condition"],
        "identity_residual": dec.diagnostics["identity_residual"],
    }
    _write_json(out / "summary.json", summary)
    _write_csv(out / "eigenvalues.csv", ["re", "im"], np.column_stack([lam.real, lam.imag]))
    print(path)
    return EXIT_OK


def _prediction_settings(args, dec):
    cfg = _config(args) if (args.config or args.x0 is None) else None
    pred = cfg["prediction"] if cfg else {}
    x0 = args.x0 if args.x0 is not None else pred.get("x0")
    if x0 is None or len(x0) != dec.state_dim:
        raise SchemaError(f"--x0 must have {dec.state_dim} entries")
    T = args.T if args.T is not None else pred.get("T", 1.0)
    step = args.step if args.step is not None else pred.get("step", 1e-3)
    mode = args.mode or pred.get("mode", "both")
    if not (T > 0 and step > 0 and step <= T):
        raise SchemaError("need 0 < step <= T")
    return np.asarray(x0, dtype=float), float(T), float(step), mode


def cmd_predict(args) -> int:
    dec = core.load_decomposition(args.decomposition)
    x0, T, step, mode = _prediction_settings(args, dec)
    out = _out(args)
    n = int(round(T / step))
    times = step * np.arange(n + 1)
    preds, status = {}, EXIT_OK
    metrics = {"mode": mode, "x0": x0.tolist(), "T": T, "step": step,
               "gram_condition": dec.diagnostics.get("condition", {}),
               "identity_residual": dec.diagnostics.get("identity_residual"),
               "imag_residual": {}, "relative_rms": {}}
    if mode in ("direct", "both"):
        preds["direct"] = core.predict_direct(dec, x0, times)
    if mode in ("indirect", "both"):
        try:
            preds["indirect"] = core.predict_indirect(dec, x0, T, step)
        except DivergenceError as exc:
            preds["indirect"] = exc.partial
            metrics["divergence"] = {"time": exc.time, "message": str(exc)}
            status = EXIT_DIVERGENCE
    for name, p in preds.items():
        _write_prediction(out / f"prediction_{name}.csv", p)
        metrics["imag_residual"][name] = p.imag_residual
    if args.compare_truth:
        sysm = _truth_system(args.compare_truth)
        law = core.feedback_from_dict(dec.law)
        sub = max(1, int(np.ceil(step / args.truth_step - 1e-9)))
        truth = systems.simulate_closedloop(sysm.rhs, x0, law, T, 1.0 / step, step / sub)
        _write_prediction(out / "truth.csv", core.Prediction.from_trajectory(truth))
        for name, p in preds.items():
            if len(p.times) == len(truth.times):
                metrics["relative_rms"][name] = core.relative_rms(
                    p.states, truth.states).tolist()
    _write_json(out / "metrics.json", metrics)
    print(out / "metrics.json")
    return status


def cmd_field(args) -> int:
    dec = core.load_decomposition(args.decomposition)
    cfg = _config(args) if args.config else experiment.load_config({})
    per_side = args.grid if args.grid is not None else int(cfg["field"]["per_side"])
    hw = args.half_width if args.half_width is not None else float(cfg["field"]["half_width"])
    n = dec.state_dim
    if per_side == 1:
        X = np.zeros((1, n))
    else:
        X = systems.grid_initial_conditions(per_side, hw, n)
    out = _out(args)
    fhat, imag = core.reconstruct_field(dec, X, return_imag=True)
    cols = [X, fhat]
    header = [f"x{i + 1}" for i in range(n)] + [f"fhat{i + 1}" for i in range(n)]
    if args.compare_truth:
        sysm = _truth_system(args.compare_truth)
        ftrue = sysm.closed_loop_field(core.feedback_from_dict(dec.law), X)
        cols += [ftrue, np.abs(fhat - ftrue)]
        header += [f"ftrue{i + 1}" for i in range(n)] + [f"err{i + 1}" for i in range(n)]
    path = _write_csv(out / "field.csv", header, np.hstack(cols))
    _report(f"field: {len(X)} points, imag residual {imag:.3g}")
    print(path)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None),
                        help="config file or preset name")
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("--threads", type=int, default=d(0),
                        help="assembly threads (0 = all cores)")
    parser.add_argument("--seed", type=int, default=d(None),
                        help="override the excitation seed")


def _model_flags(p):
    p.add_argument("--width", type=float, help="Gaussian kernel width k")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-tilde", type=float, dest="eps_tilde")
    p.add_argument("--basis", choices=("kernel", "data_centric"))
    p.add_argument("--gain", type=_matrix, help='feedback gain, rows split by ";"')


def _data_flags(p):
    p.add_argument("--preset", choices=experiment.PRESETS)
    p.add_argument("--system", choices=("duffing", "twolink", "linear"))
    p.add_argument("--grid", type=int, help="initial-condition grid points per side")
    p.add_argument("--half-width", type=float, dest="half_width")
    p.add_argument("--T", type=float, help="trajectory duration (s)")
    p.add_argument("--hz", type=float, help="sample rate")
    p.add_argument("--internal-step", type=float, dest="internal_step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cldmd", description="Control-Liouville dynamic mode decomposition")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate an open-loop training dataset")
    _global_flags(p, suppress=True)
    _data_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", help="run the decomposition")
    _global_flags(p, suppress=True)
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--dataset", help="dataset manifest (default: simulate from config)")
    p.add_argument("--dump-matrices", dest="dump_matrices", metavar="DIR")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("predict", help="predict the closed-loop response")
    _global_flags(p, suppress=True)
    p.add_argument("decomposition")
    p.add_argument("--mode", choices=("direct", "indirect", "both"))
    p.add_argument("--x0", type=_floats)
    p.add_argument("--T", type=float, help="horizon (s)")
    p.add_argument("--step", type=float, help="output / RK4 step (s)")
    p.add_argument("--compare-truth", dest="compare_truth", metavar="PRESET",
                   help="simulate ground truth with this system or preset")
    p.add_argument("--truth-step", type=float, dest="truth_step", default=1e-4,
                   help="largest internal step of the ground-truth simulation")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("field", help="reconstruct the closed-loop vector field on a grid")
    _global_flags(p, suppress=True)
    p.add_argument("decomposition")
    p.add_argument("--grid", type=int, help="points per side")
    p.add_argument("--half-width", type=float, dest="half_width")
    p.add_argument("--compare-truth", dest="compare_truth", metavar="PRESET")
    p.set_defaults(func=cmd_field)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _backend.set_threads(args.threads)
    try:
        return args.func(args)
    except (SchemaError, InvalidArgumentError, FileNotFoundError) as exc:
        _report(f"error: {exc}")
        return EXIT_CONFIG
    except DivergenceError as exc:
        _report(f"diverged: {exc}")
        return EXIT_DIVERGENCE
    except (SingularMatrixError, NumericFailureError, np.linalg.LinAlgError) as exc:
        _report(f"numeric failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
