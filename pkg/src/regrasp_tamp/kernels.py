"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``REGRASP_TAMP_PURE=1`` forces the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("REGRASP_TAMP_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

polygon_gap = _impl.polygon_gap
polygon_distance = _impl.polygon_distance
parts_collide = _impl.parts_collide
bellman_sweep = _impl.bellman_sweep

__all__ = ["BACKEND", "polygon_gap", "polygon_distance", "parts_collide", "bellman_sweep"]
