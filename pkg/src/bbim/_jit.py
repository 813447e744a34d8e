"""JIT switch for the hot kernels.

Set ``BBIM_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
The fallback is also used automatically when numba cannot be imported.
"""
import os

_flag = os.environ.get("BBIM_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if USE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
