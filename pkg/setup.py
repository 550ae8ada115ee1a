"""Builds the optional tree kernel; the package works without it."""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [Extension(
            "oculodec._kernels._tree",
            ["src/oculodec/_kernels/_tree.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # no -ffast-math: the kernel must match the Python fallback bit for bit
            extra_compile_args=["-O2"],
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
