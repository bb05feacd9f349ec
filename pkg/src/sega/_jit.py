"""Optional numba compilation.

Set ``SEGA_DISABLE_NUMBA=1`` before importing :mod:`sega` to run every
kernel as plain numpy code. The kernels are written so that both modes
execute the same arithmetic on the same random draws.
"""
import os

_flag = os.environ.get("SEGA_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - depends on environment
    _numba = None

NUMBA_ENABLED = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _numba is not None:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
