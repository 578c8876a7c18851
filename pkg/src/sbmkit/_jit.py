"""Optional numba compilation.

Set ``SBMKIT_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path; otherwise functions decorated with :func:`maybe_njit` are compiled.
"""
from __future__ import annotations

import os
import types

DISABLE_ENV = "SBMKIT_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
else:
    # the bundled TBB is too old for numba; the portable pool avoids a warning
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"


def numba_requested() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes")


USE_NUMBA = numba is not None and numba_requested()


def maybe_njit(func=None, **opts):
    """Compile with numba when enabled; helpers decorated this way compose."""

    def wrap(f):
        return numba.njit(cache=True, **opts)(f) if USE_NUMBA else f

    return wrap(func) if func is not None else wrap


_PLAIN: dict = {}


def python(f):
    """Plain-Python version of a possibly compiled function.

    Compiled helpers referenced through module globals are swapped for their
    plain versions too, so the result accepts numpy arrays end to end.
    """
    f = getattr(f, "py_func", f)
    if f in _PLAIN:
        return _PLAIN[f]
    g = dict(f.__globals__)
    plain = types.FunctionType(f.__code__, g, f.__name__, f.__defaults__, f.__closure__)
    _PLAIN[f] = plain
    for k, v in f.__globals__.items():
        if hasattr(v, "py_func"):
            g[k] = python(v)
    return plain
