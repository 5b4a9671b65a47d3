"""Build the optional Cython kernels; the package falls back to numpy without them."""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("MCSQKD_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "mcsqkd._kernels",
                    ["src/mcsqkd/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:
        print(f"mcsqkd: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
