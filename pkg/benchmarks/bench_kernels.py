"""Compare the numba kernels with their numpy twins.

    python benchmarks/bench_kernels.py [--sizes 500 2000 5000] [--repeats 3]

Each kernel is called once untimed first, which triggers numba compilation.
"""
import argparse
import time

import numpy as np

from facecf import _accel, kernels


def best_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 5000])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can be timed")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<18}{'N':>7}{'numpy s':>11}{'numba s':>11}{'speedup':>9}")
    for n in args.sizes:
        X = rng.uniform(0, 10, size=(n, 2))
        eps = 0.5
        jobs = {
            "pairs_within": (lambda: kernels.pairs_within_numpy(X, eps, kernels.EUCLIDEAN),
                             lambda: kernels.pairs_within_numba(X, eps, kernels.EUCLIDEAN)),
            "gauss_kernel_sum": (lambda: kernels.gauss_kernel_sum_numpy(X, X, 0.5),
                                 lambda: kernels.gauss_kernel_sum_numba(X, X, 0.5)),
            "cross_distances": (lambda: kernels.cross_distances_numpy(X[:500], X, kernels.EUCLIDEAN),
                                lambda: kernels.cross_distances_numba(X[:500], X, kernels.EUCLIDEAN)),
        }
        for name, (np_fn, nb_fn) in jobs.items():
            t_np = best_time(np_fn, args.repeats)
            if _accel.HAVE_NUMBA:
                t_nb = best_time(nb_fn, args.repeats)
                print(f"{name:<18}{n:>7}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>8.1f}x")
            else:
                print(f"{name:<18}{n:>7}{t_np:>11.4f}{'-':>11}{'-':>9}")


if __name__ == "__main__":
    main()
