"""JIT switch for the numeric kernels.

Kernels are written once as scalar Python and compiled with ``numba.njit``
when numba is importable.  Setting ``FURUTA_BENCH_DISABLE_NUMBA=1`` (or
running without numba installed) leaves them as plain Python so the
fallback path can be exercised and benchmarked.
"""

from __future__ import annotations

import os

_FLAG = "FURUTA_BENCH_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get(_FLAG, "0").lower() not in ("1", "true", "yes")


def kernel(fn):
    """Compile ``fn`` in nopython mode, or return it untouched on the fallback path."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend() -> str:
    return "numba" if USE_NUMBA else "python"
