"""Benchmark the numba kernels against the pure-numpy fallback."""

import time

import numpy as np

from . import backend
from ._kernels import disc_convolve, project_columns, tap_convolve
from .fields import make_disc_kernel, make_gaussian_kernel


def _time(fn, repeats):
    fn()  # warm-up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def run_benchmark(size=256, repeats=5):
    rng = np.random.default_rng(0)
    field = rng.random((size, size))
    gauss = make_gaussian_kernel(0.01, size)
    stack = rng.random((3, size * size))

    cases = []
    for r in (3, 9, 21):
        k = make_disc_kernel(r)
        cases.append((f"disc conv r={r} ({size}x{size})",
                      lambda k=k: disc_convolve(field, k.half_widths, k.weight, 0.0, impl="numpy"),
                      lambda k=k: disc_convolve(field, k.half_widths, k.weight, 0.0, impl="numba")))
    cases.append((f"gaussian conv ({len(gauss.weights)} taps)",
                  lambda: tap_convolve(field, gauss.offsets, gauss.weights, 0.0, impl="numpy"),
                  lambda: tap_convolve(field, gauss.offsets, gauss.weights, 0.0, impl="numba")))
    cases.append((f"simplex projection (3x{size * size})",
                  lambda: project_columns(stack, impl="numpy"),
                  lambda: project_columns(stack, impl="numba")))

    rows = []
    for name, f_np, f_nb in cases:
        numpy_ms = _time(f_np, repeats)
        if backend.HAS_NUMBA:
            numba_ms = _time(f_nb, repeats)
            speedup = numpy_ms / numba_ms if numba_ms > 0 else None
        else:
            numba_ms = speedup = None
        rows.append({"name": name, "numpy_ms": numpy_ms,
                     "numba_ms": numba_ms, "speedup": speedup})
    return rows
