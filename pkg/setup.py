"""Builds the optional Cython blur kernel.

The package works without it (a NumPy fallback is selected at import);
build in place with `python setup.py build_ext --inplace` or just
`pip install -e . --no-build-isolation`.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "patchenhance.kernels._blur_cy",
                ["src/patchenhance/kernels/_blur_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
