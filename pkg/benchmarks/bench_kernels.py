"""Timing comparison between the compiled and numpy inner-loop kernels.

Runs both proximal entry points (accelerated and plain descent) on the same
random subproblem batch per backend and prints median per-solve times plus
the speedup.  The two implementations are exact twins up to summation order,
so the result columns double as a cross-check.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 16 64 256 --repeats 5
"""

import argparse
import statistics
import sys
import time

import numpy as np

from grnm import _kernels_py

try:
    from grnm import _kernels
except ImportError:
    _kernels = None


def make_batch(n, count, seed, p=2.5, with_l1=True):
    """Random PSD subproblem instances at a common size."""
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(count):
        A = rng.standard_normal((n, n))
        H = A @ A.T
        g = rng.standard_normal(n)
        mu = float(10.0 ** rng.uniform(-1.0, 0.5))
        rho = 0.1 * float(np.abs(g).max()) if with_l1 else 0.0
        batch.append((g, H, mu, p, rho))
    return batch


def time_backend(impl, routine, batch, tol, max_iter, repeats):
    """Median seconds per solve and total inner iterations for one backend."""
    fn = getattr(impl, routine)
    times = []
    iterations = 0
    for _ in range(repeats):
        iterations = 0
        tick = time.perf_counter()
        for g, H, mu, p, rho in batch:
            d0 = np.zeros(g.shape[0])
            if routine == "accelerated_prox_min":
                _, it, _ = fn(g, H, mu, p, rho, d0, max_iter, tol)
            else:
                _, it = fn(g, H, mu, p, rho, d0, max_iter)
            iterations += it
        times.append((time.perf_counter() - tick) / len(batch))
    return statistics.median(times), iterations


def check_agreement(batch, tol, max_iter):
    """Largest relative step difference between the two backends."""
    worst = 0.0
    for g, H, mu, p, rho in batch:
        d_py, _, _ = _kernels_py.accelerated_prox_min(
            g, H, mu, p, rho, np.zeros(g.shape[0]), max_iter, tol)
        d_c, _, _ = _kernels.accelerated_prox_min(
            g, H, mu, p, rho, np.zeros(g.shape[0]), max_iter, tol)
        scale = 1.0 + float(np.linalg.norm(d_py))
        worst = max(worst, float(np.abs(d_c - d_py).max()) / scale)
    return worst


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 128])
    parser.add_argument("--count", type=int, default=10, help="instances per size")
    parser.add_argument("--repeats", type=int, default=3, help="timing repetitions")
    parser.add_argument("--tol", type=float, default=1e-10)
    parser.add_argument("--max-iter", type=int, default=200_000)
    parser.add_argument("--plain-iters", type=int, default=5000,
                        help="fixed iteration budget for the plain-descent rows")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _kernels is None:
        print("compiled extension not built; only the numpy backend is available",
              file=sys.stderr)

    header = f"{'routine':24s} {'n':>5s} {'python':>12s} {'compiled':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for routine in ("accelerated_prox_min", "plain_prox_min"):
        budget = args.max_iter if routine == "accelerated_prox_min" else args.plain_iters
        for n in args.sizes:
            batch = make_batch(n, args.count, args.seed + n)
            t_py, _ = time_backend(_kernels_py, routine, batch,
                                   args.tol, budget, args.repeats)
            if _kernels is None:
                print(f"{routine:24s} {n:5d} {t_py * 1e3:10.3f}ms {'-':>12s} {'-':>8s}")
                continue
            t_c, _ = time_backend(_kernels, routine, batch,
                                  args.tol, budget, args.repeats)
            print(f"{routine:24s} {n:5d} {t_py * 1e3:10.3f}ms "
                  f"{t_c * 1e3:10.3f}ms {t_py / t_c:7.1f}x")

    if _kernels is not None:
        worst = check_agreement(make_batch(16, 10, args.seed + 1), args.tol, args.max_iter)
        print(f"\nbackend agreement: worst relative step difference {worst:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
