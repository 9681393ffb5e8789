# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_fallback`` exactly."""

import numpy as np

from libc.math cimport cos, fabs, sin


def mark_distances(const long long[::1] assigned, Py_ssize_t size):
    """Flag every causal difference assigned[l] - assigned[r] (r <= l) below ``size``."""
    cdef Py_ssize_t n = assigned.shape[0]
    cdef Py_ssize_t l, r
    cdef long long d, top
    out = np.zeros(size, dtype=np.uint8)
    cdef unsigned char[::1] marks = out
    for l in range(n):
        top = assigned[l]
        for r in range(l + 1):
            d = top - assigned[r]
            if 0 <= d < size:
                marks[d] = 1
    return out.view(np.bool_)


def trig_grid_abs(const double[::1] amps, const double[::1] omegas,
                  const double[::1] phases, double lo, double hi, double step,
                  Py_ssize_t n):
    """|S|, |S'|, |S''| at x_i = min(lo + i*step, hi), i < n, as a (3, n) array.

    Each component is advanced by an angle-addition rotation and resynced
    with exact cos/sin every few points, so drift stays near one ulp.
    """
    cdef Py_ssize_t m = amps.shape[0]
    cdef Py_ssize_t i, j
    cdef double x, ang, c, s, cn, w, a, aw, aww, cd, sd
    out = np.zeros((3, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    for j in range(m):
        a = amps[j]
        w = omegas[j]
        aw = a * w
        aww = aw * w
        cd = cos(w * step)
        sd = sin(w * step)
        c = 0.0
        s = 0.0
        for i in range(n):
            x = lo + i * step
            if x > hi or (i & 31) == 0:
                if x > hi:
                    x = hi
                ang = w * x + phases[j]
                c = cos(ang)
                s = sin(ang)
            res[0, i] += a * c
            res[1, i] -= aw * s
            res[2, i] -= aww * c
            cn = c * cd - s * sd
            s = s * cd + c * sd
            c = cn
    for i in range(n):
        res[0, i] = fabs(res[0, i])
        res[1, i] = fabs(res[1, i])
        res[2, i] = fabs(res[2, i])
    return out
