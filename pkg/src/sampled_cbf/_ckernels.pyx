# Compiled pairwise-distance kernels. Mirrors sampled_cbf._pykernels exactly:
# same operation order, so both backends return bit-identical results.
import numpy as np

cimport cython
from libc.math cimport INFINITY, sqrt


def min_pair(const double[:, ::1] body, const double[:, ::1] obstacles,
             const double[::1] shift):
    """Return ``(min_sq, i, j)`` over all pairs ``(body[i] + shift, obstacles[j])``.

    Ties go to the lexicographically smallest ``(i, j)``.
    """
    cdef Py_ssize_t n = body.shape[0]
    cdef Py_ssize_t m = obstacles.shape[0]
    cdef Py_ssize_t k = body.shape[1]
    cdef Py_ssize_t i, j, d
    cdef Py_ssize_t bi = -1, bj = -1
    cdef double best = INFINITY
    cdef double sq, diff, v0, v1
    cdef double[::1] v = np.empty(k, dtype=np.float64)

    if k == 2:
        for i in range(n):
            v0 = body[i, 0] + shift[0]
            v1 = body[i, 1] + shift[1]
            for j in range(m):
                diff = v0 - obstacles[j, 0]
                sq = diff * diff
                diff = v1 - obstacles[j, 1]
                sq = sq + diff * diff
                if sq < best:
                    best = sq
                    bi = i
                    bj = j
    else:
        for i in range(n):
            for d in range(k):
                v[d] = body[i, d] + shift[d]
            for j in range(m):
                sq = 0.0
                for d in range(k):
                    diff = v[d] - obstacles[j, d]
                    sq = sq + diff * diff
                if sq < best:
                    best = sq
                    bi = i
                    bj = j
    return best, bi, bj


cdef inline double _pair_sq(const double[:, ::1] body, const double[:, ::1] obstacles,
                            const double[::1] shift, Py_ssize_t i, Py_ssize_t j,
                            Py_ssize_t k) noexcept nogil:
    cdef double sq = 0.0
    cdef double diff
    cdef Py_ssize_t d
    for d in range(k):
        diff = (body[i, d] + shift[d]) - obstacles[j, d]
        sq = sq + diff * diff
    return sq


def pairs_within(const double[:, ::1] body, const double[:, ::1] obstacles,
                 const double[::1] shift, double bound):
    """Return ``(I, J, SQ)`` for every pair whose squared distance is <= bound.

    Pairs come out in row-major ``(i, j)`` order.
    """
    cdef Py_ssize_t n = body.shape[0]
    cdef Py_ssize_t m = obstacles.shape[0]
    cdef Py_ssize_t k = body.shape[1]
    cdef Py_ssize_t i, j, count = 0, pos = 0
    cdef double sq

    for i in range(n):
        for j in range(m):
            if _pair_sq(body, obstacles, shift, i, j, k) <= bound:
                count += 1

    out_i = np.empty(count, dtype=np.int64)
    out_j = np.empty(count, dtype=np.int64)
    out_sq = np.empty(count, dtype=np.float64)
    cdef long long[::1] oi = out_i
    cdef long long[::1] oj = out_j
    cdef double[::1] osq = out_sq
    for i in range(n):
        for j in range(m):
            sq = _pair_sq(body, obstacles, shift, i, j, k)
            if sq <= bound:
                oi[pos] = i
                oj[pos] = j
                osq[pos] = sq
                pos += 1
    return out_i, out_j, out_sq


def nearest_sq(const double[:, ::1] queries, const double[:, ::1] points):
    """Squared distance from each query to its nearest point."""
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t k = queries.shape[1]
    cdef Py_ssize_t q, j, d
    cdef double best, sq, diff
    out = np.empty(nq, dtype=np.float64)
    cdef double[::1] o = out
    for q in range(nq):
        best = INFINITY
        for j in range(m):
            sq = 0.0
            for d in range(k):
                diff = queries[q, d] - points[j, d]
                sq = sq + diff * diff
            if sq < best:
                best = sq
        o[q] = best
    return out


def active_pairs(const double[:, ::1] body, const double[:, ::1] obstacles,
                 const double[::1] shift, double tolerance, double radius,
                 double slack):
    """Culled equivalent of ``min_pair`` followed by ``pairs_within``.

    Returns ``(best, I, J, SQ)``; see ``kernels.active_pairs``.
    """
    cdef Py_ssize_t n = body.shape[0]
    cdef Py_ssize_t m = obstacles.shape[0]
    cdef Py_ssize_t k = body.shape[1]
    cdef Py_ssize_t i, j, d, q, kept = 0, count = 0, pos = 0
    cdef double cmin = INFINITY, c, diff, sq, upper, low, best = INFINITY, bound
    keep_arr = np.empty(m, dtype=np.int64)
    dist_arr = np.empty(m, dtype=np.float64)
    cdef long long[::1] keep = keep_arr
    cdef double[::1] dist = dist_arr

    for j in range(m):
        sq = 0.0
        for d in range(k):
            diff = obstacles[j, d] - shift[d]
            sq = sq + diff * diff
        c = sqrt(sq)
        dist[j] = c
        if c < cmin:
            cmin = c
    upper = (cmin + radius) * (cmin + radius) * (1.0 + slack) + tolerance
    for j in range(m):
        low = dist[j] - radius
        if low < 0.0:
            low = 0.0
        if low * low * (1.0 - slack) <= upper:
            keep[kept] = j
            kept += 1

    for i in range(n):
        for q in range(kept):
            sq = _pair_sq(body, obstacles, shift, i, keep[q], k)
            if sq < best:
                best = sq
    bound = best + tolerance
    for i in range(n):
        for q in range(kept):
            if _pair_sq(body, obstacles, shift, i, keep[q], k) <= bound:
                count += 1
    out_i = np.empty(count, dtype=np.int64)
    out_j = np.empty(count, dtype=np.int64)
    out_sq = np.empty(count, dtype=np.float64)
    cdef long long[::1] oi = out_i
    cdef long long[::1] oj = out_j
    cdef double[::1] osq = out_sq
    for i in range(n):
        for q in range(kept):
            sq = _pair_sq(body, obstacles, shift, i, keep[q], k)
            if sq <= bound:
                oi[pos] = i
                oj[pos] = keep[q]
                osq[pos] = sq
                pos += 1
    return best, out_i, out_j, out_sq
