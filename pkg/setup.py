"""Optional compiled build of the simulator's hot modules.

The modules are plain Python. When Cython is importable they are also
compiled, using the ``.pxd`` files next to them for static types. This makes
them several times faster. If Cython is missing, the build fails, or
``TSNSIM_PURE=1`` is set, the package installs as pure Python.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext

HOT_MODULES = ["engine", "netmodel", "switchfabric", "frer", "traffic", "network"]


class OptionalBuildExt(build_ext):
    """Fall back to the pure-Python modules when a compiler is unavailable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure means pure Python
            print(f"tsnsim: compiled modules skipped ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"tsnsim: {ext.name} not compiled ({exc})", file=sys.stderr)


def extensions():
    if os.environ.get("TSNSIM_PURE"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    paths = [f"src/tsnsim/{name}.py" for name in HOT_MODULES]
    return cythonize(paths, compiler_directives={"language_level": 3}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
