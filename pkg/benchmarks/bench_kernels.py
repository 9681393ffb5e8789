"""Times the compiled kernels against the numpy fallback and checks they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from endprompt_lab import _fallback

try:
    from endprompt_lab import _kernels
except ImportError:
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    for L in (1024, 4096):
        a, b = 120, 8
        assigned = np.concatenate([np.arange(a), np.arange(L - b, L)]).astype(np.int64)
        yield f"mark_distances plan L={L}", "mark_distances", (assigned, L)
        dense = np.sort(rng.choice(L, size=L // 4, replace=False)).astype(np.int64)
        yield f"mark_distances sparse L={L} n={dense.size}", "mark_distances", (dense, L)
    for D, n in ((16, 4096), (64, 40_000)):
        j = np.arange(D // 2)
        omegas = 10000.0 ** (-2 * j / D) / 8.0
        amps, phases = rng.uniform(0, 1, D // 2), rng.uniform(-np.pi, np.pi, D // 2)
        args = (amps, omegas, phases, 0.0, 4095.0, 4095.0 / (n - 1), n)
        yield f"trig_grid_abs D={D} n={n}", "trig_grid_abs", args


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels are not built; only the fallback is available")
    print(f"{'case':42s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for label, fn, fargs in cases():
        py = getattr(_fallback, fn)
        t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{label:42s} {t_py:10.3f} {'-':>10s} {'-':>8s}")
            continue
        cy = getattr(_kernels, fn)
        if not np.allclose(py(*fargs), cy(*fargs), rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{label}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*fargs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:42s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
