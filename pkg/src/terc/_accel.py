"""Switch between numba-compiled kernels and the pure-numpy fallbacks.

Set ``TERC_NUMBA=0`` in the environment before importing :mod:`terc` to
force the numpy path.  If numba cannot be imported the numpy path is used
regardless of the flag.
"""

import os

_FALSY = {"0", "false", "no", "off"}

try:  # pragma: no cover - exercised implicitly by whichever path is active
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_REQUESTED = os.environ.get("TERC_NUMBA", "1").strip().lower() not in _FALSY
NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_REQUESTED and NUMBA_AVAILABLE


def njit(fn):
    """Compile ``fn`` with ``numba.njit`` when numba is available.

    The undecorated function is kept on ``.py_func`` either way so the
    benchmark can time the interpreted loop too.
    """
    if not NUMBA_AVAILABLE:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
