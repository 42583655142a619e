"""Build the optional Cython kernels.

The extension is marked optional: when Cython or a C compiler is missing the
package still installs and ``mg1socp.kernels`` falls back to pure Python.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "mg1socp._kernels",
                ["src/mg1socp/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
