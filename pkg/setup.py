import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# numpy ships its bit generators and distributions as a static library
npy_random_lib = os.path.join(np.get_include(), "..", "..", "random", "lib")

extensions = [
    Extension(
        "branchsel._kernels",
        ["src/branchsel/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npy_random_lib],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
