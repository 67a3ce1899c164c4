from setuptools import setup, Extension
from Cython.Build import cythonize
import numpy

extensions = [
    Extension(
        name="stecnn.numerics._ckernels",
        sources=["src/stecnn/numerics/_ckernels.pyx"],
        extra_compile_args=["-O3", "-g0", "-Wno-unreachable-code"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions))
