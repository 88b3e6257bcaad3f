"""Build the optional compiled kernel; fall back silently if it cannot be built."""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using NumPy fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc}); using NumPy fallback",
                  file=sys.stderr)


def extensions():
    if os.environ.get("GAUL_NO_EXTENSION"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    flags = ["-O3", "-ffp-contract=off", "-fno-fast-math"]
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext = Extension(
        "gaul._core",
        ["src/gaul/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
