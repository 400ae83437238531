"""Build the optional Cython episode kernels.

The package works without the extension (a vectorized numpy fallback is
selected at import time), so any failure here degrades to a pure-Python
install instead of aborting. Set COORDEX_PURE=1 to skip the build.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("COORDEX_PURE", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext = Extension(
            "coordex._kernels",
            sources=["src/coordex/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except Exception as exc:  # noqa: BLE001 - degrade to pure python
        print(f"coordex: skipping compiled kernels ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
