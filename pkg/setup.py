"""Build the optional compiled dual-loop kernel.

The package works without it: ``cmdplab.kernels`` falls back to a
pure-Python loop when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CMDPLAB_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "cmdplab._dual_loop",
                    ["src/cmdplab/_dual_loop.pyx"],
                    include_dirs=[np.get_include()],
                    # bit-identical results with the Python fallback
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
