"""Wall-clock timing of the transform kernels over size sweeps."""
from __future__ import annotations

import time

import numpy as np

from freqnet import transforms

DEFAULT_SIZES = (8, 16, 32, 64, 128, 256)


def _kernels():
    return {
        "fft": lambda rng, n: (transforms.fft, rng.standard_normal(n)),
        "dct2_via_fft": lambda rng, n: (transforms.dct2_via_fft, rng.standard_normal(n)),
        "wht2d": lambda rng, n: (transforms.wht2d, rng.standard_normal((1, n, n, 1))),
        "dct_2d": lambda rng, n: (transforms.dct_2d, rng.standard_normal((1, n, n, 1))),
        "fft2d_magnitude": lambda rng, n: (transforms.fft2d_magnitude, rng.standard_normal((1, n, n, 1))),
    }


KERNELS = tuple(_kernels())


def run_bench(sizes=DEFAULT_SIZES, repeats: int = 5, kernels=KERNELS, seed: int = 0):
    """Yield (kernel, n, best seconds over ``repeats``) rows, sizes ascending."""
    rng = np.random.default_rng(seed)
    table = _kernels()
    for name in kernels:
        for n in sorted(set(int(s) for s in sizes)):
            fn, arg = table[name](rng, n)
            fn(arg)  # warm the matrix caches
            best = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn(arg)
                best = min(best, time.perf_counter() - t0)
            yield name, n, best


def bench_csv(rows) -> str:
    return "kernel,n,seconds\n" + "".join(f"{k},{n},{s:.9f}\n" for k, n, s in rows)
