"""Kernel backend selection: numba-jitted loops or the pure-Python fallback.

The backend is chosen once per process from the ``LAGLEARN_BACKEND``
environment variable (``numba`` or ``numpy``).  When unset, numba is used
if it imports, otherwise the fallback.  Both backends run the same source,
so results agree; only throughput differs.
"""

import os

_VALID = ("numba", "numpy")


def _detect() -> str:
    forced = os.environ.get("LAGLEARN_BACKEND", "").strip().lower()
    if forced:
        if forced not in _VALID:
            raise ValueError(
                f"LAGLEARN_BACKEND must be one of {_VALID}, got {forced!r}"
            )
        return forced
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


_ACTIVE = _detect()


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return _ACTIVE


def jit_compile(fn):
    """Compile ``fn`` with numba in nopython mode (cached, GIL released)."""
    from numba import njit

    return njit(cache=True, nogil=True)(fn)
