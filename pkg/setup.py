from setuptools import Extension, setup

# The compiled kernels are an optimization; the package falls back to the
# NumPy implementations in ranlb._kernels._pure when the extension is absent.
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ranlb._kernels._speedups",
                ["src/ranlb/_kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
