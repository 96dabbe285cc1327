"""Kernel backend selection.

Hot numeric kernels in :mod:`spherecov._kernels` ship in two variants:
numba ``@njit``-compiled loops and pure-numpy fallbacks.  The active variant
is chosen once, at import time, from the ``SPHERECOV_BACKEND`` environment
variable:

    SPHERECOV_BACKEND=numba    force numba (raises if numba is missing)
    SPHERECOV_BACKEND=numpy    force the pure-numpy path
    unset                      numba when importable, numpy otherwise
"""

import os

_requested = os.environ.get("SPHERECOV_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        "SPHERECOV_BACKEND must be 'numba' or 'numpy', got %r" % (_requested,)
    )

if _requested == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
