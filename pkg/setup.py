"""Build script: compiles the kernel extension when a toolchain is available.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time), so a failed cythonization or a
missing compiler downgrades to a warning instead of failing the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/evparksim/_ckernels.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on the build host
    warnings.warn(f"building without the compiled kernels: {exc}")

setup(ext_modules=ext_modules)
