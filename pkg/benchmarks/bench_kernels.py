"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation, or cache load) is excluded from timings.
"""
import argparse
import time

import numpy as np

from asd import _kernels as K


def _cases(rng):
    n = 64
    C = rng.random((n, n)) * 2
    a = np.full(n, 1 / n)
    lam = 0.05
    Kmat = np.exp(-(C - C.min()) / lam)
    D = rng.random((20, 20))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0)
    X = rng.standard_normal((2000, 16))
    centers = X[rng.choice(2000, 5, replace=False)]
    prev = rng.integers(-1, 20, 5000)
    new = rng.integers(0, 20, 5000)
    return {
        "sinkhorn_plain 64x64": ("sinkhorn_plain", (Kmat, a, a, 1000, 1e-6)),
        "sinkhorn_log 64x64": ("sinkhorn_log", (C, lam, a, a, 200, 1e-6)),
        "pam_build 20x20 k=5": ("pam_build", (D, 5)),
        "pam_swap 20x20 k=5": ("pam_swap", (D, np.arange(5, dtype=np.int64))),
        "count_transitions 5000": ("count_transitions", (prev, new, 20)),
        "lloyd 2000x16 k=5": ("lloyd", (X, centers, 50, 1e-6)),
    }


def _best_time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<26}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for label, (name, call_args) in _cases(rng).items():
        f_np = getattr(K, f"{name}_numpy")
        f_nb = getattr(K, f"{name}_numba")
        f_nb(*call_args)  # warm up / compile
        t_np = _best_time(f_np, call_args, args.repeat)
        t_nb = _best_time(f_nb, call_args, args.repeat)
        print(f"{label:<26}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
