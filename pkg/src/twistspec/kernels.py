"""Tridiagonal eigen-kernels, compiled when available.

The Cython extension ``_tridiag`` is preferred; if it was not built (or
``TWISTSPEC_PURE_PYTHON`` is set) the pure-Python module is used instead.
``BACKEND`` reports which one is active.
"""
import os

from . import _tridiag_py

if os.environ.get("TWISTSPEC_PURE_PYTHON"):
    _impl = _tridiag_py
else:
    try:
        from . import _tridiag as _impl
    except ImportError:  # extension not built
        _impl = _tridiag_py

BACKEND = "python" if _impl is _tridiag_py else "cython"

sturm_count = _impl.sturm_count
bisect_eigenvalues = _impl.bisect_eigenvalues
solve_shifted = _impl.solve_shifted
gershgorin = _impl.gershgorin

__all__ = ["BACKEND", "sturm_count", "bisect_eigenvalues", "solve_shifted", "gershgorin"]
