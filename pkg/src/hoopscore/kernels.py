"""Kernel backend selection.

The compiled module is used when it imports; set ``HOOPSCORE_PURE_PYTHON=1``
to force the numpy versions (useful for comparing the two).
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("HOOPSCORE_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

window_halves_max = _impl.window_halves_max
window_mean = _impl.window_mean
encode_batch = _impl.encode_batch
window_starts = _kernels_py.window_starts

__all__ = ["BACKEND", "window_halves_max", "window_mean", "encode_batch", "window_starts"]
