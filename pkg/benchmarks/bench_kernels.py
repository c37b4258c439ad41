"""Benchmark the compiled blur kernel against the NumPy fallback.

Run:  python3 benchmarks/bench_kernels.py [side] [repeats]
"""

import sys
import time

import numpy as np

from patchenhance import kernels
from patchenhance.kernels import _blur_np
from patchenhance.kernels._common import gaussian_kernel_1d


def run(side: int = 512, repeats: int = 5) -> None:
    rng = np.random.default_rng(0)
    plane = rng.random((side, side))
    kernel = gaussian_kernel_1d(1.5, 5)

    backends = {"numpy": _blur_np.sep_convolve_2d}
    if kernels.BACKEND == "cython":
        from patchenhance.kernels import _blur_cy

        backends["cython"] = _blur_cy.sep_convolve_2d
    else:
        print("compiled kernel not built; benchmarking the fallback only")

    results = {}
    for name, fn in backends.items():
        fn(plane, kernel)  # warm-up
        start = time.perf_counter()
        for _ in range(repeats):
            fn(plane, kernel)
        results[name] = (time.perf_counter() - start) / repeats
        print(f"{name:>7}: {results[name] * 1e3:8.2f} ms per {side}x{side} blur (11-tap)")
    if "cython" in results:
        print(f"speedup: {results['numpy'] / results['cython']:.2f}x")


if __name__ == "__main__":
    side = int(sys.argv[1]) if len(sys.argv) > 1 else 512
    repeats = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    run(side, repeats)
