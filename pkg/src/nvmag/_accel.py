"""Backend selection for the hot numerical kernels.

Kernels are written once in a numba-compatible subset of Python/numpy.
When numba is importable they are compiled with ``njit``; setting the
environment variable ``NVMAG_DISABLE_NUMBA=1`` (before import) forces the
plain Python/numpy path instead. Array kernels that matter in the fallback
(Faddeeva, batched forward solve) also ship a vectorised numpy twin.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

DISABLED_BY_ENV = os.environ.get("NVMAG_DISABLE_NUMBA", "").strip().lower() not in _FALSY

HAVE_NUMBA = False
if not DISABLED_BY_ENV:
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def jit(fn=None, **options):
    """``numba.njit(cache=True)`` when the numba backend is active, identity otherwise."""

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        options.setdefault("cache", True)
        return numba.njit(**options)(f)

    if fn is None:
        return wrap
    return wrap(fn)
