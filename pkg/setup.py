import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    # -ffp-contract=off keeps the compiler from fusing a*b+c into FMA so the
    # compiled kernels round every operation exactly like the numpy fallback.
    extensions = cythonize(
        [
            Extension(
                "corrvol._ckernels",
                ["src/corrvol/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    extensions = []

setup(ext_modules=extensions)
