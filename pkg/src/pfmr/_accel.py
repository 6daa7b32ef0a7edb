"""Numba switch.

Set ``PFMR_DISABLE_NUMBA=1`` before import to run the pure-numpy kernels.
"""

import os

_flag = os.environ.get("PFMR_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _flag not in ("1", "true", "yes", "on")

njit_kwargs = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
}


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    import numba

    return numba.njit(**njit_kwargs)(fn)
