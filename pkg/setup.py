"""Build the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes the row-filter and trigram-scoring
hot loops fast.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "notetable._kernels._native",
                ["src/notetable/_kernels/_native.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
