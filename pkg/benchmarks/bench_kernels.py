"""Compiled vs pure-numpy kernels on the workloads the simulation actually runs.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints median wall time per call for each backend, the speedup, and the
largest absolute difference between the two results.
"""

import argparse
import statistics
import time

import numpy as np

from shrinktest import kernels
from shrinktest.fullbayes import DEFAULT_GRID, hyper_posterior, tables_for
from shrinktest.priors import horseshoe, standard_double_pareto


def timed(fn, repeat):
    out, times = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def workloads():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal(200) * np.where(rng.random(200) < 0.1, 3.4, 1.0)
    hs, sdp = horseshoe(), standard_double_pareto()
    tables = tables_for(hs, DEFAULT_GRID)
    zs = np.abs(xs)[None, :] / DEFAULT_GRID.sigmas[:, None]
    prob = hyper_posterior(hs, xs, DEFAULT_GRID, tables).prob
    return {
        "batch_weights horseshoe m=200": lambda: kernels.batch_weights(hs, xs, 0.05),
        "batch_weights sdp m=200": lambda: kernels.batch_weights(sdp, xs, 0.05),
        "table log_d_sums 96x48x200": lambda: tables.log_d_sums(zs),
        "table mixed_weights 96x48x200": lambda: tables.mixed_weights(zs, prob),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        kernels.use_backend("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return
    jobs = workloads()
    print(f"{'workload':34s} {'compiled ms':>12s} {'python ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in jobs.items():
        kernels.use_backend("compiled")
        fast, t_c = timed(fn, args.repeat)
        kernels.use_backend("python")
        slow, t_p = timed(fn, args.repeat)
        diff = float(np.max(np.abs(np.asarray(fast) - np.asarray(slow))))
        print(f"{name:34s} {1e3 * t_c:12.3f} {1e3 * t_p:10.3f} {t_p / t_c:8.1f} {diff:10.2e}")
    kernels.use_backend("compiled")


if __name__ == "__main__":
    main()
