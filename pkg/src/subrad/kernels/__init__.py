"""Numeric kernel backends.

The hot inner loops (master-equation right-hand side, adaptive stepping)
exist twice: jit-compiled (numba) and vectorized pure numpy.  Selection is
driven by the SUBRAD_BACKEND environment variable ("numba" or "numpy");
unset, numba is used when importable and numpy otherwise.  The choice is
resolved lazily on first use and then cached for the process lifetime.
"""

import os

_ACTIVE = None
_VALID = ("numba", "numpy")


def get_backend():
    """Return the active backend module (resolves the env flag once)."""
    global _ACTIVE
    if _ACTIVE is None:
        choice = os.environ.get("SUBRAD_BACKEND", "").strip().lower()
        if choice and choice not in _VALID:
            raise ValueError(
                f"SUBRAD_BACKEND must be one of {_VALID}, got {choice!r}")
        if choice == "numpy":
            from . import numpy_backend as backend
        elif choice == "numba":
            from . import numba_backend as backend
        else:
            try:
                from . import numba_backend as backend
            except ImportError:
                from . import numpy_backend as backend
        _ACTIVE = backend
    return _ACTIVE


def active_backend_name():
    return get_backend().NAME
