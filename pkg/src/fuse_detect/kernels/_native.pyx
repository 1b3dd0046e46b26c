# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: mixed-radix FFT, bilinear resize, blur, JPEG round trip.

Same contracts as `numpy_backend`; auxiliary tables come from `common` so the
two backends consume identical coefficients. The 1-D FFT splits a length
n = p2 * q transform (p2 the power-of-two part) into q radix-2 passes plus an
O(n*q) combine, which covers 224 = 32 * 7 and any test size.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport rint

cnp.import_array()

from fuse_detect.kernels.common import fft_plan, resize_coords


# ------------------------------------------------------------------ fft

cdef void _fft1d(double complex* src, Py_ssize_t stride, Py_ssize_t n,
                 double complex* out, double complex* scratch,
                 double complex* w, cnp.int64_t* bitrev,
                 Py_ssize_t p2, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t n2, i, span, half, tstep, b, j, k1, k2, k, idx
    cdef double complex t, acc
    # Stage A: q radix-2 transforms over the strided subsequences.
    for n2 in range(q):
        for i in range(p2):
            scratch[n2 * p2 + i] = src[(bitrev[i] * q + n2) * stride]
        span = 2
        while span <= p2:
            half = span >> 1
            tstep = n / span
            b = 0
            while b < p2:
                for j in range(half):
                    t = w[j * tstep] * scratch[n2 * p2 + b + j + half]
                    scratch[n2 * p2 + b + j + half] = scratch[n2 * p2 + b + j] - t
                    scratch[n2 * p2 + b + j] = scratch[n2 * p2 + b + j] + t
                b += span
            span <<= 1
    # Stage B: combine across the q subsequences.
    if q == 1:
        for i in range(n):
            out[i] = scratch[i]
        return
    for k2 in range(q):
        for k1 in range(p2):
            k = k1 + p2 * k2
            acc = 0
            idx = 0  # exponent n2*k mod n, stepped incrementally (k < n)
            for n2 in range(q):
                acc = acc + scratch[n2 * p2 + k1] * w[idx]
                idx += k
                if idx >= n:
                    idx -= n
            out[k] = acc


def fft2(plane):
    """Unnormalized forward 2-D DFT of a float64 (H, W) plane."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] src = np.ascontiguousarray(plane, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], v = src.shape[1]
    w_row, rev_row, p2_row, q_row = fft_plan(v)
    w_col, rev_col, p2_col, q_col = fft_plan(h)
    cdef cnp.ndarray[double complex, ndim=2, mode="c"] out = np.empty((h, v), dtype=np.complex128)
    cdef cnp.ndarray[double complex, ndim=1, mode="c"] buf = np.empty(max(h, v), dtype=np.complex128)
    cdef cnp.ndarray[double complex, ndim=1, mode="c"] scratch = np.empty(max(h, v), dtype=np.complex128)
    cdef cnp.ndarray[double complex, ndim=1, mode="c"] col = np.empty(h, dtype=np.complex128)
    # Plan tables are immutable; copy so the buffer views are writable-safe.
    cdef cnp.ndarray[double complex, ndim=1, mode="c"] wr = np.array(w_row, dtype=np.complex128)
    cdef cnp.ndarray[double complex, ndim=1, mode="c"] wc = np.array(w_col, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] rr = np.array(rev_row, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] rc = np.array(rev_col, dtype=np.int64)
    cdef Py_ssize_t p2r = p2_row, qr = q_row, p2c = p2_col, qc = q_col
    cdef Py_ssize_t y, x
    # Rows: real input widened into the column buffer lane by lane.
    for y in range(h):
        for x in range(v):
            buf[x] = src[y, x]
        _fft1d(&buf[0], 1, v, &out[y, 0], &scratch[0], &wr[0], &rr[0], p2r, qr)
    # Columns, in place via a gather buffer.
    for x in range(v):
        _fft1d(&out[0, x], v, h, &col[0], &scratch[0], &wc[0], &rc[0], p2c, qc)
        for y in range(h):
            out[y, x] = col[y]
    return out


# ------------------------------------------------------------------ resize

def resize_bilinear(img, Py_ssize_t out_h, Py_ssize_t out_w):
    """Bilinear resize of an (H, W, C) float64 image, half-pixel convention."""
    cdef cnp.ndarray[double, ndim=3, mode="c"] src = np.ascontiguousarray(img, dtype=np.float64)
    y0_, y1_, ty_ = resize_coords(src.shape[0], out_h)
    x0_, x1_, tx_ = resize_coords(src.shape[1], out_w)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] y0 = y0_, y1 = y1_, x0 = x0_, x1 = x1_
    cdef cnp.ndarray[double, ndim=1, mode="c"] ty = ty_, tx = tx_
    cdef Py_ssize_t c = src.shape[2]
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((out_h, out_w, c), dtype=np.float64)
    cdef Py_ssize_t i, j, ch
    cdef double top, bot, fx, fy
    for i in range(out_h):
        fy = ty[i]
        for j in range(out_w):
            fx = tx[j]
            for ch in range(c):
                top = src[y0[i], x0[j], ch] * (1.0 - fx) + src[y0[i], x1[j], ch] * fx
                bot = src[y1[i], x0[j], ch] * (1.0 - fx) + src[y1[i], x1[j], ch] * fx
                out[i, j, ch] = top * (1.0 - fy) + bot * fy
    return out


# ------------------------------------------------------------------ blur

def blur_separable(img, taps, Py_ssize_t radius):
    """Edge-padded separable convolution along x then y."""
    cdef cnp.ndarray[double, ndim=3, mode="c"] pad = np.ascontiguousarray(
        np.pad(np.ascontiguousarray(img, dtype=np.float64),
               ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    )
    cdef cnp.ndarray[double, ndim=1, mode="c"] k = np.ascontiguousarray(taps, dtype=np.float64)
    cdef Py_ssize_t klen = k.shape[0]
    cdef Py_ssize_t h = pad.shape[0] - 2 * radius, w = pad.shape[1] - 2 * radius
    cdef Py_ssize_t c = pad.shape[2]
    cdef cnp.ndarray[double, ndim=3, mode="c"] horiz = np.empty((pad.shape[0], w, c), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((h, w, c), dtype=np.float64)
    cdef Py_ssize_t y, x, ch, t
    cdef double acc
    for y in range(pad.shape[0]):
        for x in range(w):
            for ch in range(c):
                acc = 0.0
                for t in range(klen):
                    acc += pad[y, x + t, ch] * k[t]
                horiz[y, x, ch] = acc
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                acc = 0.0
                for t in range(klen):
                    acc += horiz[y + t, x, ch] * k[t]
                out[y, x, ch] = acc
    return out


# ------------------------------------------------------------------ jpeg

def jpeg_roundtrip(img, qtable, dct_mat):
    """Block-DCT quantization round trip; see the numpy backend docstring."""
    cdef cnp.ndarray[double, ndim=3, mode="c"] arr = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = arr.shape[0], w = arr.shape[1], c = arr.shape[2]
    # cdivision is on: keep the modulo operands nonnegative.
    cdef Py_ssize_t ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8
    s_np = arr * 255.0 - 128.0
    if ph or pw:
        s_np = np.pad(s_np, ((0, ph), (0, pw), (0, 0)), mode="edge")
    cdef cnp.ndarray[double, ndim=3, mode="c"] s = np.ascontiguousarray(s_np)
    cdef cnp.ndarray[double, ndim=2, mode="c"] q = np.ascontiguousarray(qtable, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] m = np.ascontiguousarray(dct_mat, dtype=np.float64)
    cdef Py_ssize_t hp = s.shape[0], wp = s.shape[1]
    cdef Py_ssize_t by, bx, ch, u, v, x, y
    cdef double acc
    cdef double block[8][8]
    cdef double tmp[8][8]
    cdef double coef[8][8]
    for ch in range(c):
        for by in range(0, hp, 8):
            for bx in range(0, wp, 8):
                for y in range(8):
                    for x in range(8):
                        block[y][x] = s[by + y, bx + x, ch]
                # coef = M @ block @ M.T, quantized to integer steps
                for u in range(8):
                    for x in range(8):
                        acc = 0.0
                        for y in range(8):
                            acc += m[u, y] * block[y][x]
                        tmp[u][x] = acc
                for u in range(8):
                    for v in range(8):
                        acc = 0.0
                        for x in range(8):
                            acc += tmp[u][x] * m[v, x]
                        coef[u][v] = rint(acc / q[u, v]) * q[u, v]
                # block = M.T @ coef @ M
                for y in range(8):
                    for v in range(8):
                        acc = 0.0
                        for u in range(8):
                            acc += m[u, y] * coef[u][v]
                        tmp[y][v] = acc
                for y in range(8):
                    for x in range(8):
                        acc = 0.0
                        for v in range(8):
                            acc += tmp[y][v] * m[v, x]
                        s[by + y, bx + x, ch] = acc
    out = s_np[:h, :w] if (ph or pw) else s_np
    return np.clip(np.rint(out + 128.0), 0.0, 255.0) / 255.0
