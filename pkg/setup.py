import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "grnm._kernels",
        ["src/grnm/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps the compiled loops on plain IEEE adds/muls so
        # results stay reproducible and comparable with the numpy fallback.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

if cythonize is not None:
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    # No Cython available: install without the extension; grnm.kernels falls
    # back to the pure-Python implementations at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
