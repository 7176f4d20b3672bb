"""Planar polygon primitives: clipping, areas, distances, torus wrap helpers.

Polygons are (m, 2) float arrays of vertices in counterclockwise order.
All routines are exact for convex inputs up to float rounding; no external
geometry dependency.
"""

from __future__ import annotations

import numpy as np

# integer translates used to resolve torus wrap-around
TRANSLATES = np.array(
    [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=float
)


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counterclockwise loops)."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    return poly if polygon_area(poly) >= 0 else poly[::-1].copy()


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of convex polygons (both CCW)."""
    output = list(subject)
    n = len(clipper)
    for k in range(n):
        if not output:
            break
        cp1 = clipper[k]
        cp2 = clipper[(k + 1) % n]
        ex, ey = cp2[0] - cp1[0], cp2[1] - cp1[1]

        def inside(p):
            return ex * (p[1] - cp1[1]) - ey * (p[0] - cp1[0]) >= -1e-15

        def intersect(s, e):
            dcx, dcy = cp1[0] - cp2[0], cp1[1] - cp2[1]
            dpx, dpy = s[0] - e[0], s[1] - e[1]
            n1 = cp1[0] * cp2[1] - cp1[1] * cp2[0]
            n2 = s[0] * e[1] - s[1] * e[0]
            den = dcx * dpy - dcy * dpx
            return np.array([(n1 * dpx - n2 * dcx) / den,
                             (n1 * dpy - n2 * dcy) / den])

        inp = output
        output = []
        s = inp[-1]
        for e in inp:
            if inside(e):
                if not inside(s):
                    output.append(intersect(s, e))
                output.append(e)
            elif inside(s):
                output.append(intersect(s, e))
            s = e
    if len(output) < 3:
        return np.empty((0, 2))
    return np.asarray(output)


def clip_area(subject: np.ndarray, clipper: np.ndarray) -> float:
    piece = clip_convex(subject, clipper)
    return abs(polygon_area(piece)) if len(piece) else 0.0


def point_in_convex(poly: np.ndarray, pts: np.ndarray, strict: bool = True) -> np.ndarray:
    """Vectorized membership of pts (n,2) in a convex CCW polygon.

    strict=True tests the open interior; boundary points report False.
    """
    pts = np.atleast_2d(pts)
    inside = np.ones(len(pts), dtype=bool)
    n = len(poly)
    for k in range(n):
        a = poly[k]
        b = poly[(k + 1) % n]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        if strict:
            inside &= cross > 0.0
        else:
            inside &= cross >= -1e-12
    return inside


def convex_contains_polygon(outer: np.ndarray, inner: np.ndarray, tol: float = 0.0) -> bool:
    """True if every vertex of inner lies in the closed hull of outer."""
    n = len(outer)
    for k in range(n):
        a = outer[k]
        b = outer[(k + 1) % n]
        cross = (b[0] - a[0]) * (inner[:, 1] - a[1]) - (b[1] - a[1]) * (inner[:, 0] - a[0])
        if np.any(cross < -tol - 1e-12):
            return False
    return True


def seg_point_distance(a: np.ndarray, b: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Distances from points (n,2) to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        d = pts - a
        return np.hypot(d[:, 0], d[:, 1])
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = pts - proj
    return np.hypot(d[:, 0], d[:, 1])


def seg_seg_distance(a0, a1, b0, b1) -> float:
    """Distance between two planar segments."""
    if _segments_intersect(a0, a1, b0, b1):
        return 0.0
    cands = [
        seg_point_distance(b0, b1, np.atleast_2d(a0))[0],
        seg_point_distance(b0, b1, np.atleast_2d(a1))[0],
        seg_point_distance(a0, a1, np.atleast_2d(b0))[0],
        seg_point_distance(a0, a1, np.atleast_2d(b1))[0],
    ]
    return float(min(cands))


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_intersect(a0, a1, b0, b1) -> bool:
    d1 = _orient(b0, b1, a0)
    d2 = _orient(b0, b1, a1)
    d3 = _orient(a0, a1, b0)
    d4 = _orient(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    for (p, q, r, d) in ((b0, b1, a0, d1), (b0, b1, a1, d2),
                         (a0, a1, b0, d3), (a0, a1, b1, d4)):
        if d == 0.0 and _on_segment(p, q, r):
            return True
    return False


def _on_segment(p, q, r) -> bool:
    return (min(p[0], q[0]) - 1e-15 <= r[0] <= max(p[0], q[0]) + 1e-15 and
            min(p[1], q[1]) - 1e-15 <= r[1] <= max(p[1], q[1]) + 1e-15)


WIDE_TRANSLATES = np.array(
    [(dx, dy) for dx in (-2, -1, 0, 1, 2) for dy in (-2, -1, 0, 1, 2)], dtype=float
)


def _torus_elements(segments: list) -> tuple[np.ndarray, np.ndarray]:
    """Expand segments over wrap translates into endpoint arrays (m,2)."""
    a_list, b_list = [], []
    for (a, b) in segments:
        for t in WIDE_TRANSLATES:
            qa, qb = a + t, b + t
            # keep copies that can be nearest to some point of [0,1)^2
            if (max(qa[0], qb[0]) < -1.0 or min(qa[0], qb[0]) > 2.0 or
                    max(qa[1], qb[1]) < -1.0 or min(qa[1], qb[1]) > 2.0):
                continue
            a_list.append(qa)
            b_list.append(qb)
    return np.asarray(a_list), np.asarray(b_list)


def _dists_to_elements(pts: np.ndarray, ea: np.ndarray, eb: np.ndarray) -> np.ndarray:
    """(n, m) distances from points to each segment element."""
    ab = eb - ea                                    # (m,2)
    denom = np.einsum("md,md->m", ab, ab)
    denom = np.where(denom == 0.0, 1.0, denom)
    diff = pts[:, None, :] - ea[None, :, :]         # (n,m,2)
    t = np.clip(np.einsum("nmd,md->nm", diff, ab) / denom, 0.0, 1.0)
    proj = ea[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = pts[:, None, :] - proj
    return np.hypot(d[:, :, 0], d[:, :, 1])


def torus_point_to_segments(p: np.ndarray, segments: list) -> float:
    """Torus distance from a point to a union of segments."""
    ea, eb = _torus_elements(segments)
    q = np.atleast_2d(np.asarray(p, dtype=float) % 1.0)
    return float(_dists_to_elements(q, ea, eb).min())


def directed_hausdorff_segments(src: list, dst: list, tol: float = 1e-11) -> float:
    """sup over src-segment points of torus distance to the dst segments.

    Branch and bound along each source segment.  The distance to a single
    segment element is convex along a line, so
    min_j max(d_j(t0), d_j(t1)) bounds the distance envelope on [t0, t1];
    this prunes flat stretches (parallel or coincident edges) at once.
    """
    ea, eb = _torus_elements(dst)
    best = 0.0
    for (a, b) in src:
        seg_pts = np.array([a, b]) % 1.0
        dmat = _dists_to_elements(seg_pts, ea, eb)
        best = max(best, float(dmat.min(axis=1).max()))
        stack = [(0.0, 1.0, dmat[0], dmat[1])]
        while stack:
            t0, t1, d0, d1 = stack.pop()
            ub = float(np.min(np.maximum(d0, d1)))
            if ub <= best + tol:
                continue
            mid = 0.5 * (t0 + t1)
            pm = (a + mid * (b - a)) % 1.0
            dm = _dists_to_elements(pm[None, :], ea, eb)[0]
            best = max(best, float(dm.min()))
            if t1 - t0 > 1e-13:
                stack.append((t0, mid, d0, dm))
                stack.append((mid, t1, dm, d1))
    return best


def decompose_complement(poly: np.ndarray, frame: np.ndarray) -> list:
    """Convex decomposition of frame \\ poly by successive half-plane cuts.

    poly must be convex CCW and is cut out of the convex CCW frame; returns
    a list of convex polygons covering the complement with disjoint interiors.
    """
    pieces = []
    remaining = [frame]
    n = len(poly)
    big = 10.0
    for k in range(n):
        a = poly[k]
        b = poly[(k + 1) % n]
        tang = (b - a) / np.linalg.norm(b - a)
        outward = np.array([tang[1], -tang[0]])  # right of edge a->b
        mid = 0.5 * (a + b)
        halfplane_out = ensure_ccw(np.array([
            mid - big * tang, mid + big * tang,
            mid + big * tang + big * outward, mid - big * tang + big * outward]))
        halfplane_in = ensure_ccw(np.array([
            mid - big * tang, mid + big * tang,
            mid + big * tang - big * outward, mid - big * tang - big * outward]))
        next_remaining = []
        for r in remaining:
            out_piece = clip_convex(r, halfplane_out)
            if len(out_piece) and abs(polygon_area(out_piece)) > 1e-14:
                pieces.append(out_piece)
            in_piece = clip_convex(r, halfplane_in)
            if len(in_piece) and abs(polygon_area(in_piece)) > 1e-14:
                next_remaining.append(in_piece)
        remaining = next_remaining
    return pieces


def polygon_segments(poly: np.ndarray) -> list:
    return [(poly[k].copy(), poly[(k + 1) % len(poly)].copy()) for k in range(len(poly))]


def polygon_to_segment_distance(poly: np.ndarray, seg_a, seg_b) -> float:
    """Planar distance between a convex polygon and a segment (0 if touching)."""
    if np.any(point_in_convex(poly, np.vstack([seg_a, seg_b]), strict=False)):
        return 0.0
    best = np.inf
    for (a, b) in polygon_segments(poly):
        d = seg_seg_distance(a, b, seg_a, seg_b)
        if d < best:
            best = d
    return float(best)
