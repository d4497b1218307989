import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(f"hierssl.{name}", [f"src/hierssl/{name}.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])
         for name in ("_graphkern", "_mmdkern")],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
