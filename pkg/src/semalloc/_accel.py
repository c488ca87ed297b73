"""Numba switch.

Set ``SEMALLOC_DISABLE_NUMBA=1`` before import to run every kernel through
its pure-numpy fallback. Both paths must produce identical results (up to
floating-point summation order) and are cross-checked in the test suite.
"""
import os

_DISABLED = os.environ.get("SEMALLOC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    _njit = None


def njit(fn):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if HAVE_NUMBA:
        return _njit(cache=True, fastmath=False)(fn)
    return fn


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
