"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np


def _max_edge_gap(a, b):
    edges = np.roll(a, -1, axis=0) - a
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > 0.0
    normals = np.stack((edges[keep, 1], -edges[keep, 0]), axis=1) / lengths[keep, None]
    # (edges, vertices of b) signed offsets
    offsets = normals @ b.T - np.sum(normals * a[keep], axis=1)[:, None]
    return float(np.max(np.min(offsets, axis=1)))


def _vertex_edge_min(a, b):
    start = b
    seg = np.roll(b, -1, axis=0) - b
    l2 = np.sum(seg * seg, axis=1)
    rel = a[:, None, :] - start[None, :, :]
    t = np.where(l2 > 0.0, np.sum(rel * seg[None], axis=2) / np.where(l2 > 0.0, l2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = start[None] + t[..., None] * seg[None]
    d = a[:, None, :] - closest
    return float(np.sqrt(np.min(np.sum(d * d, axis=2))))


def polygon_gap(a, b):
    """Signed SAT separation; positive means disjoint by at least that much."""
    return max(_max_edge_gap(a, b), _max_edge_gap(b, a))


def polygon_distance(a, b):
    if _max_edge_gap(a, b) <= 0.0 and _max_edge_gap(b, a) <= 0.0:
        return 0.0
    return min(_vertex_edge_min(a, b), _vertex_edge_min(b, a))


def parts_collide(parts_a, parts_b, margin=0.0, eps=1e-9):
    """True iff some polygon pair is closer than ``margin`` (penetrates, if 0)."""
    limit = margin - eps
    if not parts_a or not parts_b:
        return False
    boxes_b = [(p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()) for p in parts_b]
    for a in parts_a:
        ax0, ay0 = a.min(axis=0)
        ax1, ay1 = a.max(axis=0)
        for b, (bx0, by0, bx1, by1) in zip(parts_b, boxes_b):
            if ax0 - bx1 >= limit or bx0 - ax1 >= limit or ay0 - by1 >= limit or by0 - ay1 >= limit:
                continue
            gap = polygon_gap(a, b)
            if gap >= limit:
                continue
            if gap <= 0.0 or margin <= 0.0:
                return True
            if min(_vertex_edge_min(a, b), _vertex_edge_min(b, a)) < limit:
                return True
    return False


def bellman_sweep(v, ptr, dst, rho, reward, terminal, gamma, r_fail, v_out, best_out):
    """One synchronous backup; actions are grouped by source via ``ptr``.

    Returns the max-norm change. Ties keep the lowest action index.
    """
    n = v.shape[0]
    counts = np.diff(ptr)
    q = rho * (reward + gamma * v[dst]) + (1.0 - rho) * r_fail
    has = (counts > 0) & (terminal == 0)
    v_out[:] = r_fail
    best_out[:] = -1
    if q.size:
        nonempty = counts > 0
        starts = ptr[:-1][nonempty]
        seg_max = np.maximum.reduceat(q, starts)
        segment = np.repeat(np.arange(starts.size), counts[nonempty])
        is_best = q >= seg_max[segment]
        idx = np.where(is_best, np.arange(q.size), q.size)
        first = np.minimum.reduceat(idx, starts)
        full_max = np.full(n, r_fail)
        full_best = np.full(n, -1, dtype=best_out.dtype)
        full_max[nonempty] = seg_max
        full_best[nonempty] = first
        v_out[has] = full_max[has]
        best_out[has] = full_best[has]
    term = terminal != 0
    v_out[term] = 0.0
    best_out[term] = -1
    if n == 0:
        return 0.0
    return float(np.max(np.abs(v_out - v)))


__all__ = ["polygon_gap", "polygon_distance", "parts_collide", "bellman_sweep"]
