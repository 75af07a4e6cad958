"""Thread control for the compiled kernels."""

from __future__ import annotations

import os
import warnings

import numba
from numba.core.errors import NumbaWarning

THREADS_ENV = "GALA_THREADS"

# numba probes an old TBB on some systems and falls back on its own; the notice is noise
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)


def resolve_threads(requested: int | None = None) -> int:
    """``requested``, else ``$GALA_THREADS``, else every available core."""
    if requested is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                requested = int(env)
            except ValueError as exc:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if requested is None:
        return numba.config.NUMBA_NUM_THREADS
    if requested < 1:
        raise ValueError("thread count must be >= 1")
    return min(requested, numba.config.NUMBA_NUM_THREADS)


def set_threads(requested: int | None = None) -> int:
    n = resolve_threads(requested)
    numba.set_num_threads(n)
    return n
