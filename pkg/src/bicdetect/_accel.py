"""Numba switch.

Set ``BICDETECT_NUMBA=0`` before import to force the pure-numpy kernels.
When numba is missing the numpy kernels are used automatically.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_flag = os.environ.get("BICDETECT_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")

if numba is not None:
    prange = numba.prange
    # skip the TBB probe; it warns on older system TBB builds
    if os.environ.get("NUMBA_THREADING_LAYER") is None:
        numba.config.THREADING_LAYER = "omp"
else:  # pragma: no cover
    prange = range


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op when numba is unavailable."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
