"""Optional numba acceleration.

Set ``FACECF_DISABLE_NUMBA=1`` to force the pure-numpy code paths. When numba
is missing the numpy paths are used automatically.
"""
import os
import warnings

_DISABLED = os.environ.get("FACECF_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False
    _numba_njit = None

USE_NUMBA = HAVE_NUMBA and not _DISABLED

if _DISABLED is False and HAVE_NUMBA is False:  # pragma: no cover
    warnings.warn("numba could not be imported; falling back to numpy kernels")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    The compiled function is built even when the env flag disables numba, so
    the benchmark and the cross-backend tests can still reach it.
    """
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
