"""Backend selection for the compiled kernels.

Set ``CONSTRAINED_RISK_NO_NUMBA=1`` to force the pure-numpy path. Both paths
run the same iteration schedule, so results agree to rounding.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

_DISABLED = os.environ.get("CONSTRAINED_RISK_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
