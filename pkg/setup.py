"""Build the optional compiled kernels.

The extension is skipped (and the pure-Python kernels used) when Cython or
numpy headers are unavailable, or when OAGRASP_NO_EXT=1 is set.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("OAGRASP_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "oagrasp._ckernels",
                    ["src/oagrasp/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )

setup(ext_modules=ext_modules)
