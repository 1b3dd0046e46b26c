"""Shared precomputation for both kernel backends.

Index tables, filter taps, and basis matrices are computed once here so the
compiled and numpy backends consume bit-identical auxiliary data.
"""
import math
from functools import lru_cache

import numpy as np


def resize_coords(src_size: int, dst_size: int):
    """Source indices and interpolation weights for a 1-D bilinear resize.

    Half-pixel convention: dst center i maps to (i + 0.5) * src/dst - 0.5,
    clamped to the valid source range (edge samples repeat).
    """
    pos = (np.arange(dst_size, dtype=np.float64) + 0.5) * (src_size / dst_size) - 0.5
    pos = np.clip(pos, 0.0, float(src_size - 1))
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, src_size - 1)
    t = pos - i0
    return i0, i1, t


def gaussian_taps(sigma: float):
    """Normalized 1-D Gaussian kernel with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return taps, radius


@lru_cache(maxsize=1)
def dct8_matrix() -> np.ndarray:
    """Orthonormal 8x8 DCT-II matrix; C @ block @ C.T transforms a block."""
    u = np.arange(8, dtype=np.float64)[:, None]
    x = np.arange(8, dtype=np.float64)[None, :]
    mat = np.cos((2.0 * x + 1.0) * u * np.pi / 16.0)
    mat[0, :] *= math.sqrt(1.0 / 8.0)
    mat[1:, :] *= math.sqrt(2.0 / 8.0)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def fft_plan(n: int):
    """Twiddle table and radix split for a length-n transform.

    Returns (w, bitrev, p2, odd) where w[j] = exp(-2i*pi*j/n), p2 is the
    power-of-two part of n, odd = n // p2, and bitrev is the bit-reversal
    permutation of range(p2). Arrays are immutable and shareable.
    """
    if n < 1:
        raise ValueError("transform length must be >= 1")
    w = np.exp((-2j * np.pi / n) * np.arange(n))
    w.setflags(write=False)
    p2 = n & (-n)  # largest power of two dividing n
    bits = p2.bit_length() - 1
    rev = np.zeros(p2, dtype=np.int64)
    for i in range(p2):
        r = 0
        v = i
        for _ in range(bits):
            r = (r << 1) | (v & 1)
            v >>= 1
        rev[i] = r
    rev.setflags(write=False)
    return w, rev, p2, n // p2
