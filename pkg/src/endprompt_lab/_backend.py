"""Picks the compiled kernels when they import, the numpy fallback otherwise.

Set ``ENDPROMPT_LAB_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

if os.environ.get("ENDPROMPT_LAB_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"



def mark_distances(assigned, size: int) -> np.ndarray:
    return _impl.mark_distances(np.ascontiguousarray(assigned, dtype=np.int64), int(size))


def trig_grid_abs(amps, omegas, phases, lo: float, hi: float, step: float, n: int) -> np.ndarray:
    f8 = np.float64
    return _impl.trig_grid_abs(
        np.ascontiguousarray(amps, dtype=f8),
        np.ascontiguousarray(omegas, dtype=f8),
        np.ascontiguousarray(phases, dtype=f8),
        float(lo), float(hi), float(step), int(n),
    )
