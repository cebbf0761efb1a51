"""Scale-invariant embeddedness ratio of a lens network.

Two families of chords are scanned.  Self-chords join two nodes of the upper
curve and cut off the lobe between them; mirror-chords join a node of the
upper curve to a node of its reflection and split the enclosed region in two.
The ratio is squared chord length over the (smaller) cut-off area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PlanarCurve

__all__ = [
    "EmbedRatio",
    "embed_ratio",
    "segments_cross",
    "first_self_intersection",
    "SELF",
    "MIRROR",
]

SELF = 1
MIRROR = 2
# Pairs whose ratio is within this relative distance of the minimum count as
# tied; the witness is then the smallest (kind, i, j) among them.
TIE_RTOL = 1e-9
_BATCH = 64


@dataclass(frozen=True)
class EmbedRatio:
    q1: float
    q2: float
    g: float
    witness: tuple  # (kind, i, j); kind 0 marks a self-intersection witness


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_cross(a, b, c, d):
    """Whether the open segment ``a b`` meets the closed segments ``c d``.

    Arrays broadcast; ``a``, ``b`` have shape (..., 2).  Touching at ``a`` or
    ``b`` does not count; a segment endpoint lying strictly inside ``a b`` does.
    """
    ax, ay = a[..., 0], a[..., 1]
    bx, by = b[..., 0], b[..., 1]
    cx, cy = c[..., 0], c[..., 1]
    dx, dy = d[..., 0], d[..., 1]
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    ab2 = (bx - ax) ** 2 + (by - ay) ** 2

    def inside(px, py):
        dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
        return (dot > 0) & (dot < ab2)

    touch_c = (o1 == 0) & inside(cx, cy)
    touch_d = (o2 == 0) & inside(dx, dy)
    return proper | touch_c | touch_d


def first_self_intersection(nodes: np.ndarray):
    """Lexicographically first pair of non-adjacent crossing segments, or None."""
    p = np.asarray(nodes, dtype=float)
    n = p.shape[0] - 1
    a, b = p[:-1], p[1:]
    for i in range(n - 2):
        c, d = a[i + 2:], b[i + 2:]
        hit = _closed_cross(a[i], b[i], c, d)
        if np.any(hit):
            return i, i + 2 + int(np.flatnonzero(hit)[0])
    return None


def _closed_cross(a, b, c, d):
    """Closed-segment intersection test (used for non-adjacent segment pairs)."""
    ax, ay = a[..., 0], a[..., 1]
    bx, by = b[..., 0], b[..., 1]
    cx, cy = c[..., 0], c[..., 1]
    dx, dy = d[..., 0], d[..., 1]
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)

    def on(px, py, qx, qy, rx, ry, o):
        return (o == 0) & (np.minimum(px, qx) <= rx) & (rx <= np.maximum(px, qx)) \
            & (np.minimum(py, qy) <= ry) & (ry <= np.maximum(py, qy))

    return (proper | on(ax, ay, bx, by, cx, cy, o1) | on(ax, ay, bx, by, dx, dy, o2)
            | on(cx, cy, dx, dy, ax, ay, o3) | on(cx, cy, dx, dy, bx, by, o4))


def _prefix_cross(p):
    c = p[:-1, 0] * p[1:, 1] - p[1:, 0] * p[:-1, 1]
    return np.concatenate([[0.0], np.cumsum(c)])


def _axis_blocked(a, b, x_left, x_right):
    """Open chord crosses the axis outside [x_left, x_right] (the half-lines)."""
    ya, yb = a[..., 1], b[..., 1]
    straddle = ya * yb < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[..., 0] + (b[..., 0] - a[..., 0]) * ya / (ya - yb)
    return straddle & ((xc < x_left) | (xc > x_right))


def _candidates_self(p, S):
    n = p.shape[0] - 1
    i, j = np.triu_indices(n + 1, k=2)
    cross_ji = p[j, 0] * p[i, 1] - p[i, 0] * p[j, 1]
    area = 0.5 * np.abs(S[j] - S[i] + cross_ji)
    chord2 = np.sum((p[j] - p[i]) ** 2, axis=1)
    keep = (area > 0) & (chord2 > 0)
    return i[keep], j[keep], chord2[keep] / area[keep]


def _candidates_mirror(p, q, S, Sq):
    n = p.shape[0] - 1
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    cr = p[i, 0] * q[j, 1] - q[j, 0] * p[i, 1]
    left = S[i] + cr - Sq[j]
    right = (S[n] - S[i]) - (Sq[n] - Sq[j]) - cr
    area = 0.5 * np.minimum(np.abs(left), np.abs(right))
    chord2 = np.sum((q[j] - p[i]) ** 2, axis=1)
    keep = (area > 0) & (chord2 > 0)
    return i[keep], j[keep], chord2[keep] / area[keep]


def _first_valid(ratio, i, j, valid_fn):
    """Smallest valid ratio, then the smallest (i, j) among valid near-ties."""
    if ratio.size == 0:
        return np.inf, None
    order = np.lexsort((j, i, ratio))
    best = None
    for start in range(0, order.size, _BATCH):
        idx = order[start:start + _BATCH]
        ok = valid_fn(i[idx], j[idx])
        if np.any(ok):
            best = idx[int(np.flatnonzero(ok)[0])]
            break
    if best is None:
        return np.inf, None
    g = ratio[best]
    # Collect every valid candidate within the tie band.
    band = order[(ratio[order] <= g * (1 + TIE_RTOL))]
    ok = valid_fn(i[band], j[band])
    ties = band[ok]
    k = ties[np.lexsort((j[ties], i[ties]))[0]]
    return float(g), (int(i[k]), int(j[k]))


def embed_ratio(curve: PlanarCurve) -> EmbedRatio:
    """Discrete infimum of chord-squared over cut-off area.

    Returns ``g = 0`` with a witness ``(0, i, j)`` (crossing segments) when
    the curve intersects itself or its reflection; a node with ``y <= 0``
    strictly between the endpoints gives the witness ``(0, i, i)``.
    """
    p = curve.nodes
    n = curve.n
    y = p[:, 1]
    low = np.flatnonzero(y[1:-1] <= 0)
    hit = first_self_intersection(p)
    if hit is not None:
        return EmbedRatio(0.0, 0.0, 0.0, (0, hit[0], hit[1]))
    if low.size:
        k = int(low[0]) + 1
        return EmbedRatio(0.0, 0.0, 0.0, (0, k, k))

    q = p * np.array([1.0, -1.0])
    S = _prefix_cross(p)
    Sq = _prefix_cross(q)
    seg_a, seg_b = p[:-1], p[1:]
    all_a = np.concatenate([p[:-1], q[:-1]])
    all_b = np.concatenate([p[1:], q[1:]])
    x_left, x_right = min(p[0, 0], p[-1, 0]), max(p[0, 0], p[-1, 0])
    seg_index = np.arange(n)

    def valid_self(ii, jj):
        a = p[ii][:, None, :]
        b = p[jj][:, None, :]
        cross = segments_cross(a, b, seg_a[None], seg_b[None])
        inside = (seg_index[None, :] >= ii[:, None]) & (seg_index[None, :] < jj[:, None])
        return ~np.any(cross & inside, axis=1)

    def valid_mirror(ii, jj):
        a = p[ii][:, None, :]
        b = q[jj][:, None, :]
        cross = segments_cross(a, b, all_a[None], all_b[None])
        blocked = _axis_blocked(p[ii], q[jj], x_left, x_right)
        return ~(np.any(cross, axis=1) | blocked)

    i1, j1, r1 = _candidates_self(p, S)
    i2, j2, r2 = _candidates_mirror(p, q, S, Sq)
    q1, w1 = _first_valid(r1, i1, j1, valid_self)
    q2, w2 = _first_valid(r2, i2, j2, valid_mirror)
    if w1 is not None and (w2 is None or q1 <= q2 * (1 + TIE_RTOL)):
        witness = (SELF,) + w1
    elif w2 is not None:
        witness = (MIRROR,) + w2
    else:
        witness = (0, -1, -1)
    return EmbedRatio(q1, q2, min(q1, q2), witness)
