"""Build the optional Cython kernels.

    pip install -e . --no-build-isolation

If Cython or a compiler is unavailable the package installs without the
extension and ``fairmatch.kernels`` falls back to pure Python.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fairmatch._ckernels",
                ["src/fairmatch/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
