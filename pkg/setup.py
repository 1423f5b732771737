"""Builds the optional compiled rewrite kernel.

The package works without the extension: eqsearch falls back to the
interpreted eqsearch._kernel module at import time. The extension is the
same source file compiled with Cython under a different module name.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("eqsearch._kernel_c", ["src/eqsearch/_kernel.py"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
