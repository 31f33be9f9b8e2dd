import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# No -ffast-math: the kernels rely on IEEE signed-zero and rounding semantics
# for the bit-identity contract between backends.
extensions = [
    Extension(
        "medest._kernels",
        ["src/medest/_kernels.pyx"],
        include_dirs=[np.get_include()],
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
