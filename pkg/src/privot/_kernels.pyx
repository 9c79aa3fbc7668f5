# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for discrete Legendre transforms.

Both kernels share their contract with :mod:`privot._kernels_py`; see there
for the reference semantics.
"""
import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef inline double _cross(double ox, double oy, double ax, double ay,
                          double bx, double by) noexcept nogil:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


cdef void _line_transform(const double[::1] xs, const double[::1] ys,
                          const double[:, ::1] F, double[:, ::1] out,
                          Py_ssize_t row, Py_ssize_t* hull) noexcept nogil:
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t p = ys.shape[0]
    cdef Py_ssize_t k, j, top = 0, ptr = 0
    cdef double y, cur, nxt
    # lower convex hull of (xs[k], F[row, k]); xs strictly increasing
    for k in range(m):
        while top >= 2 and _cross(xs[hull[top - 2]], F[row, hull[top - 2]],
                                  xs[hull[top - 1]], F[row, hull[top - 1]],
                                  xs[k], F[row, k]) <= 0.0:
            top -= 1
        hull[top] = k
        top += 1
    # ys ascending: the maximising hull vertex moves monotonically right
    for j in range(p):
        y = ys[j]
        cur = xs[hull[ptr]] * y - F[row, hull[ptr]]
        while ptr + 1 < top:
            nxt = xs[hull[ptr + 1]] * y - F[row, hull[ptr + 1]]
            if nxt >= cur:
                ptr += 1
                cur = nxt
            else:
                break
        out[row, j] = cur


def legendre_lines(const double[::1] xs, const double[::1] ys,
                   const double[:, ::1] F, int threads=1):
    """Row-wise discrete Legendre transform, ``out[l, j] = max_k xs[k]*ys[j] - F[l, k]``.

    ``xs`` must be strictly increasing and ``ys`` non-decreasing.
    """
    cdef Py_ssize_t L = F.shape[0]
    cdef Py_ssize_t m = F.shape[1]
    cdef Py_ssize_t p = ys.shape[0]
    if xs.shape[0] != m:
        raise ValueError("xs length must match F columns")
    result = np.empty((L, p), dtype=np.float64)
    cdef double[:, ::1] out = result
    cdef Py_ssize_t row
    cdef Py_ssize_t* hull
    if L == 0 or p == 0:
        return result
    with nogil:
        for row in prange(L, num_threads=max(threads, 1), schedule="static"):
            hull = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
            _line_transform(xs, ys, F, out, row, hull)
            free(hull)
    return result


def fenchel_brute(const double[:, ::1] points, const double[:, ::1] ys,
                  const double[:, ::1] F, int threads=1):
    """Exhaustive transform, ``out[b, j] = max_k <points[k], ys[j]> - F[b, k]``."""
    cdef Py_ssize_t G = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t P = ys.shape[0]
    cdef Py_ssize_t B = F.shape[0]
    if F.shape[1] != G or ys.shape[1] != d:
        raise ValueError("shape mismatch between points, ys and F")
    if G == 0:
        raise ValueError("empty grid")
    result = np.empty((B, P), dtype=np.float64)
    cdef double[:, ::1] out = result
    cdef Py_ssize_t t, b, j, k, a
    cdef double best, v
    with nogil:
        for t in prange(B * P, num_threads=max(threads, 1), schedule="static"):
            b = t // P
            j = t - b * P
            best = -1.0e308
            for k in range(G):
                v = -F[b, k]
                for a in range(d):
                    v = v + points[k, a] * ys[j, a]
                if v > best:
                    best = v
            out[b, j] = best
    return result
