"""Time the compiled and numpy Gram kernels on the Duffing preset.

Usage::

    python benchmarks/bench_gram.py [--repeat 5] [--threads 0] [--grid 15]

Reports the best wall time of each backend for the full control-occupation
Gram matrix G (M^2 * 21^2 kernel evaluations) and the largest difference
between the two results.
"""
import argparse
import time

import numpy as np

from cldmd import _backend, experiment


def _inputs(grid):
    cfg = experiment.load_config("duffing")
    cfg = experiment.merge_config(cfg, {"initial_conditions": {"per_side": grid}})
    ds = experiment.generate_dataset(cfg)
    x = np.vstack([tr.states for tr in ds])
    p = np.vstack([np.column_stack([np.ones(tr.n_samples), tr.controls]) for tr in ds])
    w = np.concatenate([tr.quadrature.scaled for tr in ds])
    off = np.concatenate([[0], np.cumsum([tr.n_samples for tr in ds])])
    return (x, p, w, off, x, p, w, off, float(cfg["kernel"]["width"])), len(ds)


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=0, help="0 means all cores")
    ap.add_argument("--grid", type=int, default=15, help="initial conditions per side")
    args = ap.parse_args(argv)

    _backend.set_threads(args.threads)
    inputs, m = _inputs(args.grid)
    evals = (len(inputs[0])) ** 2
    print(f"{m} trajectories, {evals:.3g} kernel evaluations, "
          f"{_backend.get_threads()} threads")

    t_py, g_py = _best(lambda: _backend.weighted_block_gram(*inputs, backend="python"),
                       args.repeat)
    print(f"python  {t_py * 1e3:9.2f} ms")
    if _backend._compiled is None:
        print("cython  not built")
        return
    t_cy, g_cy = _best(lambda: _backend.weighted_block_gram(*inputs, backend="cython"),
                       args.repeat)
    print(f"cython  {t_cy * 1e3:9.2f} ms  ({t_py / t_cy:.1f}x)")
    diff = np.abs(g_cy - g_py).max() / np.abs(g_py).max()
    print(f"max relative difference {diff:.2e}")


if __name__ == "__main__":
    main()
