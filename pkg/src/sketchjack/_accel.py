"""Numba switch.

Set ``SKETCHJACK_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. When numba is missing the numpy kernels are used as well.
"""

import os

ENV_FLAG = "SKETCHJACK_DISABLE_NUMBA"

_disabled = os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    NUMBA_AVAILABLE = False

NUMBA_ENABLED = NUMBA_AVAILABLE and not _disabled


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    Compilation is attempted even if the env flag is set so that tests and
    benchmarks can compare both paths; the flag only controls dispatch.
    """
    if _njit is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return _njit(*args, **kwargs)
