"""Kernel backend selection.

The hot loops (disc convolutions, per-pixel simplex projections) have two
implementations: a numba JIT path and a pure-numpy path. Selection is
controlled by the CONVEXSEG_BACKEND environment variable:

    CONVEXSEG_BACKEND=numba   require numba (ImportError if missing)
    CONVEXSEG_BACKEND=numpy   force the pure-numpy fallback
    unset / auto              use numba when importable

Both paths implement identical arithmetic; `convexseg bench` compares them.
"""

import os

_requested = os.environ.get("CONVEXSEG_BACKEND", "auto").lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"CONVEXSEG_BACKEND must be auto|numba|numpy, got {_requested!r}")

HAS_NUMBA = False
if _requested != "numpy":
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _requested != "numpy"


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
