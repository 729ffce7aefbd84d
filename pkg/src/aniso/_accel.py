"""Backend selection for the hot kernels.

Set ``ANISO_NUMBA=0`` before import to run the pure-numpy fallback. Both
backends consume the same random draws and perform the same floating point
operations per node, so fitted trees and scores agree bit for bit.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("ANISO_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in {"0", "false", "no", "off"}


def njit(func):
    """Compile ``func`` with numba in nopython mode when available."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True, nogil=True)(func)


def n_threads() -> int:
    """Worker cap from ``ANISO_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("ANISO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
