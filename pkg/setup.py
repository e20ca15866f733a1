from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "polarae._sc_kernel",
    ["src/polarae/_sc_kernel.pyx"],
    extra_compile_args=["-O3"],
)

setup(
    ext_modules=cythonize(ext, compiler_directives={"language_level": "3"}),
)
