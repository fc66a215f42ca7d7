from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure
# numpy implementation in blockprior._backend.pure when the extension is
# missing (no compiler, no Cython).
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "blockprior._backend._core",
                ["src/blockprior/_backend/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
