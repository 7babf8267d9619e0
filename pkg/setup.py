"""Build the optional Cython kernels; the package falls back to numpy if absent."""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HEATLQ_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "heatlq._kernels",
                    ["src/heatlq/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
