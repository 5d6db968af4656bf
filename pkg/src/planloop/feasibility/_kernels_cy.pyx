# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled collision kernels. Mirrors _kernels_py arithmetic exactly so
either backend can serve the roadmap with identical results."""

from libc.math cimport fabs

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Keep in sync with _kernels_py.PARALLEL_EPS.
cdef double PARALLEL_EPS = 1e-12


def points_clear(pts, lo, hi):
    """True for each point that lies inside no box."""
    cdef double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[:, ::1] blo = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] bhi = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = blo.shape[0]
    out = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i, j, ax
    cdef bint inside
    if m == 0:
        return out
    for i in range(n):
        for j in range(m):
            inside = True
            for ax in range(3):
                if p[i, ax] < blo[j, ax] or p[i, ax] > bhi[j, ax]:
                    inside = False
                    break
            if inside:
                o[i] = 0
                break
    return out


cdef bint _segment_hits(double[::1] p0, double[::1] p1,
                        double[:, ::1] lo, double[:, ::1] hi) noexcept:
    cdef Py_ssize_t m = lo.shape[0]
    cdef Py_ssize_t j, ax
    cdef double t0, t1, d, ta, tb, tmin, tmax
    for j in range(m):
        t0 = 0.0
        t1 = 1.0
        for ax in range(3):
            d = p1[ax] - p0[ax]
            if fabs(d) < PARALLEL_EPS:
                if p0[ax] < lo[j, ax] or p0[ax] > hi[j, ax]:
                    t0 = 2.0
            else:
                ta = (lo[j, ax] - p0[ax]) / d
                tb = (hi[j, ax] - p0[ax]) / d
                tmin = ta if ta < tb else tb
                tmax = ta if ta > tb else tb
                if tmin > t0:
                    t0 = tmin
                if tmax < t1:
                    t1 = tmax
        if t0 <= t1:
            return True
    return False


def segments_clear(p0s, p1s, lo, hi):
    """True for each segment that crosses no box."""
    cdef double[:, ::1] a = np.ascontiguousarray(p0s, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(p1s, dtype=np.float64)
    cdef double[:, ::1] blo = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] bhi = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    out = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i
    if blo.shape[0] == 0:
        return out
    for i in range(n):
        if _segment_hits(a[i], b[i], blo, bhi):
            o[i] = 0
    return out
