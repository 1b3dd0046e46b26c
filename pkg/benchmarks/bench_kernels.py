#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [repeats]
"""
import sys
import time

import numpy as np

from fuse_detect.kernels import numpy_backend
from fuse_detect.kernels.common import dct8_matrix, gaussian_taps
from fuse_detect.preprocess import jpeg_quant_table

try:
    from fuse_detect.kernels import _native as native
except ImportError:
    native = None


def timeit(fn, repeats):
    fn()  # warm up (plan caches, allocator)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    rng = np.random.default_rng(0)
    img = rng.random((224, 224, 3))
    plane = rng.random((224, 224))
    big = rng.random((512, 384, 3))
    taps, radius = gaussian_taps(2.0)
    qtable = jpeg_quant_table(75)
    dct = dct8_matrix()

    cases = {
        "fft2 224x224": lambda b: b.fft2(plane),
        "resize 512x384->224": lambda b: b.resize_bilinear(big, 224, 224),
        "blur sigma=2 224x224x3": lambda b: b.blur_separable(img, taps, radius),
        "jpeg q=75 224x224x3": lambda b: b.jpeg_roundtrip(img, qtable, dct),
    }

    print(f"{'kernel':<26}{'numpy':>12}{'native':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_np = timeit(lambda: call(numpy_backend), repeats)
        if native is not None:
            t_nat = timeit(lambda: call(native), repeats)
            print(f"{name:<26}{t_np * 1e3:>10.2f}ms{t_nat * 1e3:>10.2f}ms{t_np / t_nat:>9.2f}x")
        else:
            print(f"{name:<26}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
    if native is None:
        print("\ncompiled extension not built; run `python3 setup.py build_ext --inplace`")


if __name__ == "__main__":
    main()
