"""Build script: compiles the optional C extension core.

The package works without the extension (a NumPy fallback is selected at
import time), so compile problems degrade to a warning: first the
-march=native flag is dropped, then the extension is skipped entirely.
"""

import warnings

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.command.build_ext import build_ext
    from setuptools.extension import Extension

    class OptionalBuildExt(build_ext):
        def build_extension(self, ext):
            try:
                super().build_extension(ext)
            except Exception:
                try:
                    ext.extra_compile_args = [a for a in ext.extra_compile_args
                                              if not a.startswith("-march")]
                    super().build_extension(ext)
                except Exception as exc:
                    warnings.warn(f"skipping compiled core ({exc})")

        def run(self):
            try:
                super().run()
            except Exception as exc:
                warnings.warn(f"skipping compiled core ({exc})")

    ext_modules = cythonize(
        [
            Extension(
                "smartcpd._core",
                sources=["src/smartcpd/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_9_API_VERSION")],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        language_level=3,
    )
    cmdclass = {"build_ext": OptionalBuildExt}
except Exception as exc:  # Cython or numpy missing at build time
    warnings.warn(f"building without the compiled core ({exc})")
    ext_modules = []
    cmdclass = {}

setup(ext_modules=ext_modules, cmdclass=cmdclass)
