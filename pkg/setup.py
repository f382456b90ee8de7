import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BHLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install; the numpy kernels are used
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "bhlab.solver._kernels",
                    ["src/bhlab/solver/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no fast-math / fma contraction: the compiled and numpy
                    # kernels must round identically
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
