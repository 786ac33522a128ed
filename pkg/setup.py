"""Build script: compiles the optional C extension for the hot counting and
Fisher-test kernels. The package falls back to the pure NumPy implementation
in comorbid._kernels.pure when the extension is absent, so a failed compile
only costs speed."""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Let the install proceed without the extension if compilation fails."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: extension build skipped ({exc}); "
                  "using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "using pure-Python kernels")


ext_modules = []
if not os.environ.get("COMORBID_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "comorbid._kernels._ckernels",
                    ["src/comorbid/_kernels/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("warning: Cython not available; using pure-Python kernels")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
