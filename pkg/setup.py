"""Build the optional Cython kernels.

The package works without them; ``sampled_cbf.kernels`` falls back to numpy
when the compiled module is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SAMPLED_CBF_NO_EXT") != "1":
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
                    "sampled_cbf._ckernels",
                    ["src/sampled_cbf/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: results must match the numpy path bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
