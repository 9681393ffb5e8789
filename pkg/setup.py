"""Builds the optional Cython kernels; the package still installs without them."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ENDPROMPT_LAB_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "endprompt_lab._kernels",
                    ["src/endprompt_lab/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
