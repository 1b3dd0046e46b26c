"""Numpy implementations of the hot kernels.

This is the fallback lane used when the compiled extension is unavailable;
both backends share the precomputed tables in `common` and must agree.
"""
import numpy as np

from fuse_detect.kernels.common import resize_coords


def fft2(plane: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT (sum convention), DC at index (0, 0)."""
    return np.fft.fft2(plane)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an (H, W, C) float64 image, half-pixel convention."""
    h, w = img.shape[0], img.shape[1]
    y0, y1, ty = resize_coords(h, out_h)
    x0, x1, tx = resize_coords(w, out_w)
    tx = tx[None, :, None]
    ty = ty[:, None, None]
    top = img[y0][:, x0] * (1.0 - tx) + img[y0][:, x1] * tx
    bot = img[y1][:, x0] * (1.0 - tx) + img[y1][:, x1] * tx
    return top * (1.0 - ty) + bot * ty


def blur_separable(img: np.ndarray, taps: np.ndarray, radius: int) -> np.ndarray:
    """Convolve an (H, W, C) image with taps along x then y.

    The image is edge-padded by `radius` in both dimensions first, which makes
    the two passes together equal a full 2-D convolution with the outer
    product of the taps on the edge-padded image.
    """
    pad = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, len(taps), axis=1)
    horiz = win @ taps  # (H + 2r, W, C)
    win = np.lib.stride_tricks.sliding_window_view(horiz, len(taps), axis=0)
    return np.ascontiguousarray(win @ taps)  # (H, W, C)


def jpeg_roundtrip(img: np.ndarray, qtable: np.ndarray, dct_mat: np.ndarray) -> np.ndarray:
    """Block-DCT quantization round trip of an (H, W, C) image in [0, 1].

    Works in the 8-bit sample domain (scale by 255, level shift by -128);
    output samples are rounded back to the integer grid like a real JPEG
    decode, then rescaled to [0, 1]. Ties round to even throughout.
    """
    h, w, c = img.shape
    ph = (-h) % 8
    pw = (-w) % 8
    s = img * 255.0 - 128.0
    if ph or pw:
        s = np.pad(s, ((0, ph), (0, pw), (0, 0)), mode="edge")
    hb, wb = s.shape[0] // 8, s.shape[1] // 8
    blocks = s.reshape(hb, 8, wb, 8, c).transpose(0, 2, 4, 1, 3)  # (hb, wb, c, 8, 8)
    coef = dct_mat @ blocks @ dct_mat.T
    quant = np.rint(coef / qtable)
    rec = dct_mat.T @ (quant * qtable) @ dct_mat
    s = rec.transpose(0, 3, 1, 4, 2).reshape(hb * 8, wb * 8, c)[:h, :w]
    return np.clip(np.rint(s + 128.0), 0.0, 255.0) / 255.0
