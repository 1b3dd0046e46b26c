"""Frequency-domain feature extraction.

A 2-D FFT of the luminance plane yields magnitude and phase spectra; their
means across spatial dimensions form a fixed-length feature vector. Two
reductions are supported: per-axis profiles (row and column means, the
default) and four scalar statistics, selected by configuration and pinned in
the checkpoint.
"""
import numpy as np

from fuse_detect import kernels
from fuse_detect.errors import ConfigError, NonFiniteInput

REDUCTION_MODES = ("axis_profiles", "scalar_stats")
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def spectral_length(mode: str, height: int = 224, width: int = 224) -> int:
    """Feature-vector length for a reduction mode."""
    if mode == "axis_profiles":
        return 2 * (height + width)
    if mode == "scalar_stats":
        return 4
    raise ConfigError(f"unknown reduction mode {mode!r}")


def fft2(plane: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT with DC shifted to the center bin."""
    plane = np.asarray(plane, dtype=np.float64)
    if not np.isfinite(plane).all():
        raise NonFiniteInput("FFT input contains NaN or infinity")
    spec = kernels.fft2(np.ascontiguousarray(plane))
    return np.fft.fftshift(spec)


def magnitude_phase(spec: np.ndarray):
    """Log-compressed magnitude and wrapped phase of a complex spectrum.

    magnitude = log(1 + |F|); phase = atan2(Im, Re) normalized into (-pi, pi]
    (the -pi branch produced by negative-real bins maps to +pi).
    """
    mag = np.log1p(np.abs(spec))
    phase = np.arctan2(spec.imag, spec.real)
    phase[phase <= -np.pi] = np.pi
    return mag, phase


def luminance(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma: 0.299 R + 0.587 G + 0.114 B."""
    return img @ LUMA_WEIGHTS


def extract_spectral(img: np.ndarray, mode: str = "axis_profiles") -> np.ndarray:
    """Spectral feature vector of a normalized (H, W, 3) image.

    axis_profiles concatenates row means and column means of the magnitude
    map, then of the phase map (2*(H+W) values); scalar_stats returns
    [mean(mag), var(mag), mean(phase), var(phase)].
    """
    spec = fft2(luminance(img))
    mag, phase = magnitude_phase(spec)
    if mode == "axis_profiles":
        return np.concatenate(
            [mag.mean(axis=1), mag.mean(axis=0), phase.mean(axis=1), phase.mean(axis=0)]
        )
    if mode == "scalar_stats":
        return np.array([mag.mean(), mag.var(), phase.mean(), phase.var()])
    raise ConfigError(f"unknown reduction mode {mode!r}")
