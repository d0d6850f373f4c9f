"""Numba switch.

Kernels in :mod:`airpid.kernels` come in two flavours: an explicit-loop body
compiled with ``numba.njit`` and a pure-numpy equivalent.  Which one the
package uses is decided once, at import time, from ``AIRPID_NUMBA``:

    AIRPID_NUMBA=0   force the numpy path
    AIRPID_NUMBA=1   use numba (default when it imports)
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("AIRPID_NUMBA", "1").strip() not in ("0", "false", "no")


def njit(func):
    """Compile ``func`` with numba if available, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def select(loop_impl, numpy_impl):
    """Pick the active implementation of a kernel."""
    return loop_impl if USE_NUMBA else numpy_impl


def backend():
    return "numba" if USE_NUMBA else "numpy"
