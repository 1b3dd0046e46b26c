"""Builds the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import);
building just makes the hot kernels faster.
"""
import os

from setuptools import Extension, setup

PYX = "src/fuse_detect/kernels/_native.pyx"

ext_modules = []
if os.path.exists(PYX):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "fuse_detect.kernels._native",
                    [PYX],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
