"""Numba switch.

Set ``ANIMKP_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
If numba cannot be imported the numpy kernels are used as well.
"""
import os

_disabled = os.environ.get("ANIMKP_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _disabled

numba_default = {
    "nopython": True,
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with the default options, or return None without numba."""
    if not NUMBA_AVAILABLE:
        return None
    return _numba.jit(**numba_default)(func)
