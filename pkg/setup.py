import os

import numpy as np
from setuptools import Extension, setup

# PSFPC_NO_EXT=1 installs the pure-Python package only
ext_modules = []
if not os.environ.get("PSFPC_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "psfpc._ckernels",
                    ["src/psfpc/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
