"""Build script: compiles the optional fast scan core.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure here downgrades to a pure build
instead of aborting the install.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/perfmodel/_scan.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    import sys

    print(f"perfmodel: skipping compiled core ({exc}); using pure-Python fallback", file=sys.stderr)

setup(ext_modules=ext_modules)
