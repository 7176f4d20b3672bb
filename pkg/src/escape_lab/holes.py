"""Holes: open finite unions of convex polygons on the torus, and
1-parameter families of them.

A hole stores its components as vertex loops in a fundamental-domain
embedding; wrap-around is resolved by testing against the 3x3 grid of
integer translates.  Membership is open: boundary points are not in the
hole.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .dynsys import Map, TorusMap

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class EmptyHoleError(ValueError):
    pass


@dataclass(frozen=True)
class Hole:
    """Finite union of open convex polygons on the torus."""

    components: tuple = ()
    kind: str = "generic"
    edge_dirs: tuple = ()  # per component, per edge: "stable" | "unstable" | None

    def __post_init__(self):
        comps = []
        for poly in self.components:
            poly = geo.ensure_ccw(np.asarray(poly, dtype=float))
            if len(poly) < 3 or abs(geo.polygon_area(poly)) < 1e-15:
                raise ValueError("hole components must have positive area")
            # shift by an integer vector so the centroid lies in [0,1)^2
            cen = poly.mean(axis=0)
            poly = poly - np.floor(cen)
            comps.append(poly)
        object.__setattr__(self, "components", tuple(comps))

    @property
    def is_empty(self) -> bool:
        return len(self.components) == 0

    def canonical_pieces(self) -> list:
        """Components clipped into the unit square over all wrap translates."""
        pieces = []
        for poly in self.components:
            for t in geo.TRANSLATES:
                piece = geo.clip_convex(poly + t, UNIT_SQUARE)
                if len(piece) and abs(geo.polygon_area(piece)) > 1e-14:
                    pieces.append(piece)
        return pieces

    def area(self) -> float:
        return float(sum(abs(geo.polygon_area(p)) for p in self.canonical_pieces()))

    def boundary_segments(self) -> list:
        segs = []
        for poly in self.components:
            segs.extend(geo.polygon_segments(poly))
        return segs

    def bounding_boxes(self):
        """(component, translate) pairs whose translate meets the unit square."""
        out = []
        for poly in self.components:
            for t in geo.TRANSLATES:
                q = poly + t
                if (q[:, 0].max() > 0 and q[:, 0].min() < 1 and
                        q[:, 1].max() > 0 and q[:, 1].min() < 1):
                    out.append(q)
        return out

    def __hash__(self):
        return hash((self.kind, tuple(tuple(map(tuple, c)) for c in self.components)))

    def __eq__(self, other):
        if not isinstance(other, Hole):
            return NotImplemented
        return (self.kind == other.kind
                and len(self.components) == len(other.components)
                and all(a.shape == b.shape and np.allclose(a, b, atol=0.0)
                        for a, b in zip(self.components, other.components)))


EMPTY_HOLE = Hole()


def contains(h: Hole, p) -> bool:
    """Open membership test for a single point."""
    if h.is_empty:
        return False
    return bool(contains_many(h, np.atleast_2d(np.asarray(p, dtype=float)))[0])


def contains_many(h: Hole, pts: np.ndarray) -> np.ndarray:
    """Vectorized open membership for (n, 2) points in [0,1)^2."""
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(len(pts), dtype=bool)
    for q in h.bounding_boxes():
        lo = q.min(axis=0)
        hi = q.max(axis=0)
        box = ((pts[:, 0] > lo[0]) & (pts[:, 0] < hi[0]) &
               (pts[:, 1] > lo[1]) & (pts[:, 1] < hi[1]))
        idx = np.flatnonzero(box & ~out)
        if len(idx):
            out[idx] = geo.point_in_convex(q, pts[idx], strict=True)
    return out


def covers_torus(h: Hole, tol: float = 1e-9) -> bool:
    return h.area() >= 1.0 - tol


def hausdorff_boundary_distance(h1: Hole, h2: Hole) -> float:
    """Symmetric Hausdorff distance between boundary polylines (torus metric)."""
    if h1.is_empty or h2.is_empty:
        raise EmptyHoleError("hausdorff distance needs nonempty holes")
    s1 = h1.boundary_segments()
    s2 = h2.boundary_segments()
    return max(geo.directed_hausdorff_segments(s1, s2),
               geo.directed_hausdorff_segments(s2, s1))


def intersection_area(h1: Hole, h2: Hole) -> float:
    total = 0.0
    for a in h1.canonical_pieces():
        for b in h2.canonical_pieces():
            total += geo.clip_area(a, b)
    return total


def symmetric_difference_area(h1: Hole, h2: Hole) -> float:
    return h1.area() + h2.area() - 2.0 * intersection_area(h1, h2)


def box_hole(x0, x1, y0, y1, kind: str = "generic") -> Hole:
    return Hole((np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]),), kind=kind)


def regular_hole_through_fixed_point(m: TorusMap, side_u: str, width: float,
                                     height: float, offset: float = 0.0) -> Hole:
    """Eigen-aligned parallelogram at the origin with a stable boundary edge.

    The stable segment {u = offset} bounds the hole: side_u = "left" puts the
    hole at u in (offset - width, offset), side_u = "right" at
    (offset, offset + width).  The s-extent is (-height, height).  With
    offset = 0 the local stable manifold of the origin lies in the boundary.
    """
    if not (0 < width < 0.4 and 0 < height < 0.4):
        raise ValueError("width and height must lie in (0, 0.4)")
    if side_u == "left":
        u0, u1 = offset - width, offset
    elif side_u == "right":
        u0, u1 = offset, offset + width
    else:
        raise ValueError("side_u must be 'left' or 'right'")
    eu, es = m.e_u, m.e_s
    corners = np.array([
        u0 * eu - height * es,
        u1 * eu - height * es,
        u1 * eu + height * es,
        u0 * eu + height * es,
    ])
    corners = geo.ensure_ccw(corners)
    dirs = _tag_edges(corners, m)
    return Hole((corners,), kind="regular", edge_dirs=(dirs,))


def _tag_edges(poly: np.ndarray, m: TorusMap) -> tuple:
    tags = []
    for (a, b) in geo.polygon_segments(poly):
        d = b - a
        d = d / np.linalg.norm(d)
        if min(np.linalg.norm(d - m.e_u), np.linalg.norm(d + m.e_u)) < 1e-9:
            tags.append("unstable")
        elif min(np.linalg.norm(d - m.e_s), np.linalg.norm(d + m.e_s)) < 1e-9:
            tags.append("stable")
        else:
            tags.append(None)
    return tuple(tags)


def validate_regular(h: Hole, m: TorusMap, tol: float = 1e-9) -> bool:
    """Every boundary edge runs along an eigen-direction of the map."""
    for poly in h.components:
        for (a, b) in geo.polygon_segments(poly):
            d = b - a
            d = d / np.linalg.norm(d)
            du = min(np.linalg.norm(d - m.e_u), np.linalg.norm(d + m.e_u))
            ds = min(np.linalg.norm(d - m.e_s), np.linalg.norm(d + m.e_s))
            if min(du, ds) > tol:
                return False
    return True


def markov_hole(cells, partition) -> Hole:
    """Hole equal to the interior of a union of Markov partition cells."""
    cells = list(cells)
    if not cells:
        raise EmptyHoleError("a markov hole needs at least one cell")
    polys = []
    for cid in cells:
        polys.append(partition.cell_polygon(cid))
    return Hole(tuple(polys), kind="markov")


def eigen_box_hole(m: TorusMap, center, u_halfwidth: float, s_halfwidth: float,
                   kind: str = "regular") -> Hole:
    """Eigen-aligned parallelogram centered at a given torus point."""
    c = np.asarray(center, dtype=float)
    eu, es = m.e_u, m.e_s
    corners = np.array([
        c - u_halfwidth * eu - s_halfwidth * es,
        c + u_halfwidth * eu - s_halfwidth * es,
        c + u_halfwidth * eu + s_halfwidth * es,
        c - u_halfwidth * eu + s_halfwidth * es,
    ])
    corners = geo.ensure_ccw(corners)
    return Hole((corners,), kind=kind, edge_dirs=(_tag_edges(corners, m),))


def complement_hole(keep_polys, kind: str = "regular") -> Hole:
    """Hole = torus minus the given keep regions (convex, within one cell).

    Decomposes the complement of each keep polygon inside the unit square
    into convex pieces; keep regions must be disjoint and are removed in
    sequence.
    """
    pieces = [UNIT_SQUARE]
    for poly in keep_polys:
        poly = geo.ensure_ccw(np.asarray(poly, dtype=float))
        next_pieces = []
        for piece in pieces:
            inter = geo.clip_convex(piece, poly)
            if len(inter) == 0 or abs(geo.polygon_area(inter)) < 1e-14:
                next_pieces.append(piece)
                continue
            next_pieces.extend(geo.decompose_complement(inter, piece))
        pieces = next_pieces
    pieces = [p for p in pieces if abs(geo.polygon_area(p)) > 1e-13]
    return Hole(tuple(pieces), kind=kind)


@dataclass(frozen=True)
class HoleFamily:
    """t -> Hole over [t_min, t_max], optionally with a Lipschitz certificate
    on boundary motion and a nesting direction."""

    fn: Callable[[float], Hole]
    t_min: float
    t_max: float
    lipschitz_cert: bool = False
    monotone: str = "none"  # none | increasing
    name: str = ""
    map: object = None      # the ambient dynamics, when the family is tied to one

    def __call__(self, t: float) -> Hole:
        if not (self.t_min - 1e-12 <= t <= self.t_max + 1e-12):
            raise ValueError(f"t={t} outside [{self.t_min}, {self.t_max}]")
        return self.fn(float(t))

    def samples(self, n: int) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, n)


def check_lipschitz(family: HoleFamily, n_grid: int = 100, slack: float = 1e-6) -> bool:
    """Sampled check of dist(bd H_t, bd H_t') <= |t - t'| on a parameter grid."""
    ts = family.samples(n_grid)
    prev_t, prev_h = ts[0], family(ts[0])
    for t in ts[1:]:
        h = family(t)
        if not (prev_h.is_empty or h.is_empty):
            d = hausdorff_boundary_distance(prev_h, h)
            if d > abs(t - prev_t) * (1.0 + slack) + 1e-12:
                return False
        prev_t, prev_h = t, h
    return True


def check_nested(family: HoleFamily, n_grid: int = 25, n_pts: int = 400,
                 seed: int = 7) -> bool:
    """Sampled containment check H_t subset of H_t' for t < t'."""
    rng = np.random.default_rng(seed)
    ts = family.samples(n_grid)
    prev = family(ts[0])
    for t in ts[1:]:
        cur = family(t)
        if not prev.is_empty:
            pts = []
            for piece in prev.canonical_pieces():
                lo, hi = piece.min(axis=0), piece.max(axis=0)
                cand = lo + rng.random((n_pts, 2)) * (hi - lo)
                inside = geo.point_in_convex(piece, cand, strict=True)
                pts.append(cand[inside])
            pts = np.vstack(pts) if pts else np.empty((0, 2))
            pts = pts - np.floor(pts)
            if len(pts) and not contains_many(cur, pts).all():
                return False
        prev = cur
    return True
