"""Pure-numpy versions of the compiled kernels (same signatures, same grids)."""

from __future__ import annotations

import numpy as np

_CHUNK = 2048


def mark_distances(assigned: np.ndarray, size: int) -> np.ndarray:
    assigned = np.ascontiguousarray(assigned, dtype=np.int64)
    marks = np.zeros(size, dtype=bool)
    for l in range(assigned.shape[0]):
        d = assigned[l] - assigned[: l + 1]
        d = d[(d >= 0) & (d < size)]
        marks[d] = True
    return marks


def trig_grid_abs(amps, omegas, phases, lo: float, hi: float, step: float, n: int) -> np.ndarray:
    amps = np.asarray(amps, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    out = np.empty((3, n))
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        x = np.minimum(lo + np.arange(start, stop) * step, hi)
        ang = np.outer(x, omegas) + phases
        c = np.cos(ang)
        out[0, start:stop] = np.abs(c @ amps)
        out[1, start:stop] = np.abs(np.sin(ang) @ (amps * omegas))
        out[2, start:stop] = np.abs(c @ (amps * omegas * omegas))
    return out
