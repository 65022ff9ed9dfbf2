"""Builds the optional Cython coordinate-descent kernel.

The package is fully functional without the compiled extension; the pure
NumPy fallback in hdhybrid._cd_py is selected at import time when the
extension is absent.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "hdhybrid._cd_fast",
                ["src/hdhybrid/_cd_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
