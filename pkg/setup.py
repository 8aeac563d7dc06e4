from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: forbid FMA contraction so the compiled kernels produce
# bit-identical trajectories to the pure-Python fallback.
ext = Extension(
    "hotuner._kernels",
    ["src/hotuner/_kernels.pyx"],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
