"""Compare the numba and numpy typicality kernels on codebook-sized inputs.

Run with ``python3 benchmarks/bench_kernels.py``. Every case also checks that
the two backends return identical masks.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coopduality.codingsim import kernels
from coopduality.probability import typical_count_bounds


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng: np.random.Generator):
    p = rng.dirichlet(np.ones(8))
    for m, n in ((1 << 12, 16), (1 << 16, 20), (1 << 18, 24)):
        lo, hi = typical_count_bounds(p, n, 0.5)
        codes = rng.choice(8, size=(m, n), p=p)
        yield f"typical_mask M={m} n={n}", (lambda b, c=codes, lo=lo, hi=hi: kernels.typical_mask(c, lo, hi, b))
    p2 = rng.dirichlet(np.ones(4)).reshape(2, 2)
    for m1, m2, n in ((256, 256, 16), (1024, 512, 20)):
        lo, hi = typical_count_bounds(p2.reshape(-1), n, 0.5)
        a = rng.integers(0, 2, size=(m1, n))
        b = rng.integers(0, 2, size=(m2, n))
        yield f"pair_mask {m1}x{m2} n={n}", (lambda be, a=a, b=b, lo=lo, hi=hi: kernels.pair_mask(a, b, 2, lo, hi, be))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.numba is None:
        raise SystemExit("numba is not installed; only the numpy backend is available")
    rng = np.random.default_rng(args.seed)
    print(f"{'case':32s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}  equal")
    for name, fn in cases(rng):
        fn("numba")  # compile or load from cache outside the timing
        same = np.array_equal(fn("numpy"), fn("numba"))
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        print(f"{name:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}  {same}")


if __name__ == "__main__":
    main()
