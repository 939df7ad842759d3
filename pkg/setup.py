"""Builds the optional compiled post-processing kernel.

The package works without it: sentrybot._kernels falls back to the
numpy implementation when the extension is missing. Set
SENTRYBOT_NO_EXT=1 to skip the compile entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SENTRYBOT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "sentrybot._kernels._native",
                    ["src/sentrybot/_kernels/_native.pyx"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
