"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy backend is selected
at import time), so a failed compile only costs speed, not correctness.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "ctvforge._ckernels",
        ["src/ctvforge/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
