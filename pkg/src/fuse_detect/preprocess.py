"""Image decoding, standardization, and training-time degradation.

Every image entering the pipeline becomes a 224x224x3 float64 array in
[0, 1] ("normalized image"). During training a stochastic degradation step
corrupts a fraction of images with either Gaussian blur or a simulated JPEG
compression round trip, which hardens the detector against post-processing.
"""
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from fuse_detect import kernels
from fuse_detect.errors import (
    ConfigError,
    CorruptStream,
    InvalidQuality,
    InvalidSigma,
    UnsupportedFormat,
)
from fuse_detect.kernels.common import dct8_matrix, gaussian_taps

TARGET_SIZE = 224

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"

# Standard JPEG luminance quantization table (quality 50 baseline).
JPEG_LUMA_QTABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class RawImage:
    """Decoded 8-bit image; data is (height, width, channels) uint8."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError("data shape does not match declared dimensions")
        if self.data.dtype != np.uint8:
            raise ValueError("data must be uint8")


@dataclass(frozen=True)
class DegradationConfig:
    """Stochastic corruption applied during training only."""

    apply_probability: float = 0.5
    blur_sigma_min: float = 0.5
    blur_sigma_max: float = 3.0
    jpeg_quality_min: int = 40
    jpeg_quality_max: int = 95
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ConfigError("apply_probability must be in [0, 1]")
        if not 0.0 < self.blur_sigma_min <= self.blur_sigma_max:
            raise ConfigError("blur sigma range must satisfy 0 < min <= max")
        if not 1 <= self.jpeg_quality_min <= self.jpeg_quality_max <= 100:
            raise ConfigError("jpeg quality range must satisfy 1 <= min <= max <= 100")


def decode_image(data: bytes) -> RawImage:
    """Decode a PNG or JPEG byte stream.

    Grayscale images are promoted to 3 channels by replication; alpha and
    palette images are converted to RGB.
    """
    if not (data.startswith(_PNG_MAGIC) or data.startswith(_JPEG_MAGIC)):
        raise UnsupportedFormat("input is not a PNG or JPEG stream")
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            if img.mode != "RGB":
                img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except UnsupportedFormat:
        raise
    except Exception as exc:
        raise CorruptStream(f"failed to decode image stream: {exc}") from exc
    h, w = arr.shape[0], arr.shape[1]
    return RawImage(width=w, height=h, channels=3, data=arr)


def standardize(img: RawImage) -> np.ndarray:
    """Bilinear-resize to 224x224, then scale samples to [0, 1]."""
    arr = img.data.astype(np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    out = kernels.resize_bilinear(np.ascontiguousarray(arr), TARGET_SIZE, TARGET_SIZE)
    out /= 255.0
    np.clip(out, 0.0, 1.0, out=out)
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ceil(3*sigma), edges clamped.

    Output is re-clamped to [0, 1].
    """
    if sigma <= 0:
        raise InvalidSigma(f"sigma must be > 0 (got {sigma})")
    taps, radius = gaussian_taps(sigma)
    out = kernels.blur_separable(np.ascontiguousarray(img, dtype=np.float64), taps, radius)
    np.clip(out, 0.0, 1.0, out=out)
    return out


def jpeg_quant_table(quality: int) -> np.ndarray:
    """Luminance quantization table scaled by the standard quality factor.

    Uses the reference integer arithmetic: scale = 5000/q for q < 50 else
    200 - 2q, entry = clamp((base*scale + 50) // 100, 1, 255).
    """
    if not isinstance(quality, (int, np.integer)) or isinstance(quality, bool):
        raise InvalidQuality(f"quality must be an integer (got {quality!r})")
    if not 1 <= quality <= 100:
        raise InvalidQuality(f"quality must be in [1, 100] (got {quality})")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = np.clip((JPEG_LUMA_QTABLE * scale + 50) // 100, 1, 255)
    return table.astype(np.float64)


def jpeg_noise(img: np.ndarray, quality: int) -> np.ndarray:
    """Simulated JPEG compression: per-channel 8x8 block DCT quantization.

    The luminance table (scaled by `quality`) is applied to every channel;
    no chroma subsampling. The image is edge-padded to a multiple of 8 and
    cropped back; output is clamped to [0, 1].
    """
    qtable = jpeg_quant_table(quality)
    return kernels.jpeg_roundtrip(
        np.ascontiguousarray(img, dtype=np.float64), qtable, dct8_matrix()
    )


def apply_degradation(
    img: np.ndarray, cfg: DegradationConfig, rng: np.random.Generator
) -> np.ndarray:
    """Randomly corrupt an image with blur or JPEG noise.

    Draw order (all from `rng`): apply-gate uniform, branch uniform (blur if
    < 0.5), then the branch parameter (sigma uniform in [min, max], or quality
    uniform over {min..max}). Pure function of (img, cfg, rng state).
    """
    if rng.random() >= cfg.apply_probability:
        return img
    if rng.random() < 0.5:
        sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max)
        return gaussian_blur(img, sigma)
    quality = int(rng.integers(cfg.jpeg_quality_min, cfg.jpeg_quality_max + 1))
    return jpeg_noise(img, quality)
