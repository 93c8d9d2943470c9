"""Compiled vs pure-Python kernel timings.

Run ``python3 benchmarks/bench_kernels.py``; prints one line per kernel with
the median wall time of each backend and the speed-up.  Both backends are
fed identical inputs and their outputs are checked to agree.
"""

import argparse
import statistics
import time

import numpy as np

from supousv.analytics import _as_grid
from supousv.kernels import get_backend
from supousv.presets import reference_params
from supousv.simulate import SimConfig, simulate_supousv


def timed(fn, repeat):
    out, times = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def bench_drift_tables(kern, size):
    p = reference_params("TN")
    gp, gr = _as_grid(p.pi, size), _as_grid(p.rho, size)
    return lambda: kern.drift_tables(gp.nodes, gp.weights, gr.nodes, gr.weights, 1e-3)


def bench_near_pairs(kern, size):
    p = reference_params("TN")
    gp, gr = _as_grid(p.pi, size), _as_grid(p.rho, size)
    tab = kern.drift_tables(gp.nodes, gp.weights, gr.nodes, gr.weights, 1e-3)
    hs = np.geomspace(0.1, 1000.0, 50)
    return lambda: [kern.near_pair_sum(h, gp.nodes, gr.nodes, tab[5], tab[6], tab[7]) for h in hs]


def bench_simulate(kern, nodes, days):
    p = reference_params("TN")
    cfg = SimConfig(burn_in=0.0, horizon=days, i_r=nodes, i_R=nodes, seed=1)
    return lambda: simulate_supousv(p, cfg, backend=kern).x


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                       rtol=1e-9, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=2048)
    ap.add_argument("--nodes", type=int, default=256)
    ap.add_argument("--days", type=float, default=365.25)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    cases = {
        f"drift_tables (grid {args.grid})": lambda k: bench_drift_tables(k, args.grid),
        f"near_pair_sum x50 (grid {args.grid})": lambda k: bench_near_pairs(k, args.grid),
        f"advance_block via simulate ({args.nodes} nodes, {args.days:g} d)":
            lambda k: bench_simulate(k, args.nodes, args.days),
    }
    cy, py = get_backend("cython"), get_backend("python")
    print(f"{'kernel':<48} {'cython [s]':>11} {'python [s]':>11} {'speed-up':>9}  match")
    for name, make in cases.items():
        out_c, t_c = timed(make(cy), args.repeat)
        out_p, t_p = timed(make(py), max(1, args.repeat // 3))
        print(f"{name:<48} {t_c:11.4f} {t_p:11.4f} {t_p / t_c:9.1f}  {agree(out_c, out_p)}")


if __name__ == "__main__":
    main()
