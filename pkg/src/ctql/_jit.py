"""Optional numba acceleration.

Hot kernels are written once as plain Python over numpy arrays and compiled
with ``numba.njit`` when available. Set ``CTQL_DISABLE_NUMBA=1`` to run the
interpreted path (useful for debugging and for the equivalence benchmark).
"""
import os

_DISABLED = os.environ.get("CTQL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("disabled by CTQL_DISABLE_NUMBA")
    from numba import njit as _njit

    USE_NUMBA = True
except ImportError:
    USE_NUMBA = False
    _njit = None


def jit(func):
    """Compile ``func`` in nopython mode, or return it unchanged on the fallback path."""
    if not USE_NUMBA:
        return func
    return _njit(cache=True, nogil=True)(func)
