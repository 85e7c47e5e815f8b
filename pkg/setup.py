from setuptools import setup, Extension

import numpy as np

# The compiled bilinear-sampling kernel is optional: egodepth.kernels falls
# back to the numpy implementation if the extension is missing.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "egodepth.kernels._bilinear_fast",
                ["src/egodepth/kernels/_bilinear_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
