# cython: language_level=3
"""Compiled inner loops: convex-polygon separation and Bellman sweeps.

Semantics are kept identical to ``_pykernels``; the test-suite runs both.
"""

from libc.math cimport sqrt, fabs, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _max_edge_gap(const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    # Largest separation of b in front of an outward edge normal of a (CCW a).
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double ex, ey, nx, ny, ln, mn, d, best = -INFINITY
    for i in range(na):
        k = i + 1
        if k == na:
            k = 0
        ex = a[k, 0] - a[i, 0]
        ey = a[k, 1] - a[i, 1]
        ln = sqrt(ex * ex + ey * ey)
        if ln == 0.0:
            continue
        nx = ey / ln
        ny = -ex / ln
        mn = INFINITY
        for j in range(nb):
            d = nx * (b[j, 0] - a[i, 0]) + ny * (b[j, 1] - a[i, 1])
            if d < mn:
                mn = d
        if mn > best:
            best = mn
    return best


cdef inline double _point_segment(double px, double py, double ax, double ay,
                                  double bx, double by) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay
    cdef double l2 = dx * dx + dy * dy
    cdef double t = 0.0
    if l2 > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    dx = ax + t * dx - px
    dy = ay + t * dy - py
    return sqrt(dx * dx + dy * dy)


cdef double _vertex_edge_min(const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double d, best = INFINITY
    for i in range(na):
        for j in range(nb):
            k = j + 1
            if k == nb:
                k = 0
            d = _point_segment(a[i, 0], a[i, 1], b[j, 0], b[j, 1], b[k, 0], b[k, 1])
            if d < best:
                best = d
    return best


def polygon_gap(const double[:, ::1] a, const double[:, ::1] b):
    """Signed SAT separation; positive means disjoint by at least that much."""
    cdef double g1 = _max_edge_gap(a, b)
    cdef double g2 = _max_edge_gap(b, a)
    return g1 if g1 > g2 else g2


def polygon_distance(const double[:, ::1] a, const double[:, ::1] b):
    cdef double g1 = _max_edge_gap(a, b)
    cdef double g2 = _max_edge_gap(b, a)
    if g1 <= 0.0 and g2 <= 0.0:
        return 0.0
    cdef double d1 = _vertex_edge_min(a, b)
    cdef double d2 = _vertex_edge_min(b, a)
    return d1 if d1 < d2 else d2


cdef inline void _bounds(const double[:, ::1] p, double* out) noexcept nogil:
    cdef Py_ssize_t i
    out[0] = p[0, 0]
    out[1] = p[0, 1]
    out[2] = p[0, 0]
    out[3] = p[0, 1]
    for i in range(1, p.shape[0]):
        if p[i, 0] < out[0]:
            out[0] = p[i, 0]
        if p[i, 0] > out[2]:
            out[2] = p[i, 0]
        if p[i, 1] < out[1]:
            out[1] = p[i, 1]
        if p[i, 1] > out[3]:
            out[3] = p[i, 1]


def parts_collide(list parts_a, list parts_b, double margin=0.0, double eps=1e-9):
    """True iff some polygon pair is closer than ``margin`` (penetrates, if 0)."""
    cdef const double[:, ::1] a
    cdef const double[:, ::1] b
    cdef double ba[4]
    cdef double bb[4]
    cdef double gap, g2, dist, limit = margin - eps
    cdef Py_ssize_t i, j, na = len(parts_a), nb = len(parts_b)
    cdef list views_b = [None] * nb
    cdef double[:, ::1] bounds_b = np.empty((nb, 4))
    for j in range(nb):
        b = parts_b[j]
        _bounds(b, bb)
        bounds_b[j, 0] = bb[0]
        bounds_b[j, 1] = bb[1]
        bounds_b[j, 2] = bb[2]
        bounds_b[j, 3] = bb[3]
    for i in range(na):
        a = parts_a[i]
        _bounds(a, ba)
        for j in range(nb):
            if (ba[0] - bounds_b[j, 2] >= limit or bounds_b[j, 0] - ba[2] >= limit
                    or ba[1] - bounds_b[j, 3] >= limit or bounds_b[j, 1] - ba[3] >= limit):
                continue
            b = parts_b[j]
            gap = _max_edge_gap(a, b)
            g2 = _max_edge_gap(b, a)
            if g2 > gap:
                gap = g2
            if gap >= limit:
                continue
            if gap <= 0.0 or margin <= 0.0:
                return True
            dist = _vertex_edge_min(a, b)
            g2 = _vertex_edge_min(b, a)
            if g2 < dist:
                dist = g2
            if dist < limit:
                return True
    return False


def bellman_sweep(const double[::1] v, const long[::1] ptr, const long[::1] dst,
                  const double[::1] rho, const double[::1] reward,
                  const unsigned char[::1] terminal, double gamma, double r_fail,
                  double[::1] v_out, long[::1] best_out):
    """One synchronous backup; actions are grouped by source via ``ptr``.

    Returns the max-norm change. Ties keep the lowest action index.
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t s, a
    cdef double q, qbest, diff, resid = 0.0
    cdef long abest
    with nogil:
        for s in range(n):
            if terminal[s]:
                v_out[s] = 0.0
                best_out[s] = -1
            elif ptr[s] == ptr[s + 1]:
                v_out[s] = r_fail
                best_out[s] = -1
            else:
                qbest = -INFINITY
                abest = -1
                for a in range(ptr[s], ptr[s + 1]):
                    q = rho[a] * (reward[a] + gamma * v[dst[a]]) + (1.0 - rho[a]) * r_fail
                    if q > qbest:
                        qbest = q
                        abest = a
                v_out[s] = qbest
                best_out[s] = abest
            diff = fabs(v_out[s] - v[s])
            if diff > resid:
                resid = diff
    return resid
