"""Numba switch.

Hot kernels are compiled with numba when it is importable and the
environment variable ``GPCONSENSUS_DISABLE_NUMBA`` is unset (or ``0``).
Otherwise every kernel dispatches to its pure-numpy twin.
"""
import os

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def _flag_disabled():
    return os.environ.get("GPCONSENSUS_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _flag_disabled()

__all__ = ["HAVE_NUMBA", "USE_NUMBA", "njit"]
