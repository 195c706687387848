"""Build script: compiles the optional argmax/confusion kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
instead of aborting. Set CONFOPT_NO_EXT=1 to skip the extension on purpose.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CONFOPT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "confopt._kernels._argmax_cy",
                    ["src/confopt/_kernels/_argmax_cy.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except Exception as exc:  # noqa: BLE001 - fall back to the numpy backend
        print(f"confopt: skipping compiled kernels ({exc!r}); numpy fallback will be used")
        ext_modules = []

setup(ext_modules=ext_modules)
