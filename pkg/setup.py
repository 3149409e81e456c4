import os

from setuptools import Extension, setup

# ILLUMLOC_PURE=1 skips the compiled kernels; the package then runs on the
# numpy fallbacks selected at import time (see illumloc.kernels).
if os.environ.get("ILLUMLOC_PURE") == "1":
    ext_modules = []
else:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "illumloc._native",
        ["src/illumloc/_native.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off: the numpy fallbacks must produce bit-identical
        # floats, so the compiler must not fuse multiply-adds.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
