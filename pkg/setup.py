import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DIFFSTRU_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        print("Cython/numpy unavailable; installing pure-Python kernels only", file=sys.stderr)
    else:
        random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
        ext_modules = cythonize(
            [
                Extension(
                    "diffstru._kernels",
                    ["src/diffstru/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    library_dirs=[random_lib],
                    libraries=["npyrandom", "m"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
