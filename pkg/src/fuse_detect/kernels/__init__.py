"""Kernel backend selection.

The compiled extension (`fuse_detect.kernels._native`) is preferred when it
imports; otherwise the numpy implementations are used. Selection happens once
at import and can be forced with FUSE_KERNEL_BACKEND=native|numpy.
"""
import os

from fuse_detect.kernels import numpy_backend

_requested = os.environ.get("FUSE_KERNEL_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "numpy"):
    raise ValueError(
        f"FUSE_KERNEL_BACKEND must be auto, native, or numpy (got {_requested!r})"
    )

_impl = None
if _requested in ("auto", "native"):
    try:
        from fuse_detect.kernels import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "FUSE_KERNEL_BACKEND=native but the compiled kernel module is "
                "not built; run `python setup.py build_ext --inplace` or reinstall"
            ) from None
        _impl = None

if _impl is not None:
    BACKEND = "native"
else:
    BACKEND = "numpy"
    _impl = numpy_backend

fft2 = _impl.fft2
resize_bilinear = _impl.resize_bilinear
blur_separable = _impl.blur_separable
jpeg_roundtrip = _impl.jpeg_roundtrip
