"""Hot grid kernels with two interchangeable backends.

The numba backend JIT-compiles the per-cell loops; the numpy backend is a
vectorized pure-numpy fallback that produces bit-identical results. Selection:

* ``GUIDESIM_KERNELS=numpy``  force the fallback
* ``GUIDESIM_KERNELS=numba``  force numba (ImportError if unavailable)
* unset / ``auto``            numba when importable, else numpy

Kernels take precomputed trig/offset tables so both backends perform the
same float64 arithmetic; callers must not rely on anything backend-specific.
"""

import os

_requested = os.environ.get("GUIDESIM_KERNELS", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"GUIDESIM_KERNELS must be auto|numba|numpy, got {_requested!r}")

if _requested in ("auto", "numba"):
    try:
        from . import _numba as _impl
        _backend = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl
        _backend = "numpy"
else:
    from . import _numpy as _impl
    _backend = "numpy"

cast_rays = _impl.cast_rays
line_of_sight = _impl.line_of_sight
min_obstacle_distance = _impl.min_obstacle_distance
thin_mask = _impl.thin_mask

UNKNOWN = _impl.UNKNOWN
FREE = _impl.FREE
OCCUPIED = _impl.OCCUPIED
WORLD_OCCUPIED = _impl.WORLD_OCCUPIED


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return _backend
