"""Time the pairwise kernels on the numba and numpy paths.

    python3 benchmarks/bench_kernels.py [--sizes 250 1000 2000] [--d 2 32] [--repeat 3]

Both backends are imported directly from ``mtgn._kernels`` so the env flag
does not matter here. The first numba call is excluded (compilation / cache
load) and the results of the two paths are compared before timing.
"""

import argparse
import time

import numpy as np

from mtgn import _accel, _kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 1000, 2000])
    ap.add_argument("--d", type=int, nargs="+", default=[2, 32])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    threads = _accel.configure_threads()
    print(f"numba threads: {threads}")
    print(f"{'kernel':<10} {'n':>6} {'d':>4} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")

    rng = np.random.default_rng(0)
    for d in args.d:
        for n in args.sizes:
            A, B = rng.standard_normal((n, d)), rng.standard_normal((n, d))
            u, p, q = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)
            inv_s2 = 1.0 / (0.5 * d)
            cases = {
                "gauss": (_kernels.gauss_sums_numpy, _kernels.gauss_sums_numba, (A, B, inv_s2)),
                "grad": (_kernels.pair_grad_numpy, _kernels.pair_grad_numba, (A, B, u, p, q, inv_s2)),
            }
            for name, (slow, fast, call) in cases.items():
                ref, got = slow(*call), fast(*call)
                # entries can cancel, so compare against the largest magnitude
                if np.max(np.abs(ref - got)) > 1e-12 * np.max(np.abs(ref)):
                    raise SystemExit(f"{name}: backends disagree at n={n}, d={d}")
                t_np = best_of(lambda: slow(*call), args.repeat)
                t_nb = best_of(lambda: fast(*call), args.repeat)
                print(f"{name:<10} {n:>6} {d:>4} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
