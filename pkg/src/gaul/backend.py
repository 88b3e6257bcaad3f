"""Select the kernel backend at import time.

The compiled ``gaul._core`` extension is used when importable; otherwise the
NumPy twin ``gaul._pycore``. Set ``GAUL_BACKEND=python`` to force the
fallback. ``GAUL_NUM_THREADS`` caps the OpenMP thread count.
"""

import os

from . import _pycore

_forced = os.environ.get("GAUL_BACKEND", "").strip().lower()

if _forced == "python":
    kernels = _pycore
else:
    try:
        from . import _core as kernels
    except ImportError:
        if _forced == "compiled":
            raise
        kernels = _pycore

BACKEND = kernels.BACKEND


def num_threads():
    """Thread count for parallel kernels (results never depend on it)."""
    raw = os.environ.get("GAUL_NUM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
