"""Build script for the optional compiled simplex pivot kernel.

The package works without the extension; cibgames.lp falls back to the
pure-numpy kernel when the compiled module is missing.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "cibgames.lp._pivot_c",
                ["src/cibgames/lp/_pivot_c.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps the compiled kernel numerically
                # identical to the numpy fallback (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
