import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    # -ffp-contract=off keeps the compiled kernels bitwise identical to the
    # pure-numpy fallback (no FMA contraction).
    extensions = cythonize(
        [
            Extension(
                "polarcone._core",
                ["src/polarcone/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package runs on the pure-python kernels if Cython is unavailable.
    extensions = []

setup(ext_modules=extensions)
