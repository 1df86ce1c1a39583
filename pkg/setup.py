"""Build the optional compiled transport kernel.

The package works without it (a pure-Python kernel is selected at import),
so a missing compiler or Cython only produces a warning.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("RICCI_SBM_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ricci_sbm._ckernels",
                    ["src/ricci_sbm/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:  # pragma: no cover
        print(f"warning: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
