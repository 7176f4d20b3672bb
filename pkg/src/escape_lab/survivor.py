"""Outer approximation of the survivor set and boundary-gap diagnostics.

A grid cell is excluded once some iterate f^i(cell), |i| <= n, is certified
to lie inside the hole; everything else is retained, so the retained union
always covers the true survivor set.  For toral maps cell iterates are
exact parallelograms; for the baker map they are axis-aligned rectangle
unions tracked with explicit splitting at branch cuts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dynsys import BakerMap, Map, TorusMap
from .holes import Hole, HoleFamily
from .symbolic import _merged_boundary_segments

PIECE_CAP = 64


@dataclass
class SurvivorApprox:
    k: int
    n: int                 # two-sided horizon actually applied
    retained: np.ndarray   # bool (k*k,), row-major ix*k + iy
    counts_history: list
    stabilized: bool

    @property
    def n_retained(self) -> int:
        return int(self.retained.sum())

    def retained_boxes(self):
        """(m, 4) array of (x0, x1, y0, y1) for retained cells."""
        k = self.k
        idx = np.flatnonzero(self.retained)
        ix, iy = np.divmod(idx, k)
        return np.column_stack([ix / k, (ix + 1) / k, iy / k, (iy + 1) / k])


def _hole_copies(hole: Hole):
    """Component copies (polygon, diameter) able to meet [0,1)^2 nbhd."""
    out = []
    for poly in hole.components:
        diam = float(np.hypot(poly[:, 0].max() - poly[:, 0].min(),
                              poly[:, 1].max() - poly[:, 1].min()))
        for t in geo.WIDE_TRANSLATES:
            q = poly + t
            if (q[:, 0].max() > -1 and q[:, 0].min() < 2 and
                    q[:, 1].max() > -1 and q[:, 1].min() < 2):
                out.append((q, diam))
    return out


def _exclude_parallelograms(base: np.ndarray, e1: np.ndarray, e2: np.ndarray,
                            copies) -> np.ndarray:
    """Mark cells whose parallelogram base + [0,1]e1 + [0,1]e2 is certified
    inside one hole component copy.  base is (m,2), one row per cell."""
    excluded = np.zeros(len(base), dtype=bool)
    centroid = base + 0.5 * (e1 + e2)
    shift = np.floor(centroid)
    corners = [base - shift, base + e1 - shift, base + e2 - shift,
               base + e1 + e2 - shift]
    for (q, _) in copies:
        inside = np.ones(len(base), dtype=bool)
        for co in corners:
            inside &= geo.point_in_convex(q, co, strict=False)
            if not inside.any():
                break
        excluded |= inside
    return excluded


def compute(m: Map, hole: Hole, k: int, n: int) -> SurvivorApprox:
    """Two-sided outer approximation at resolution k and horizon n."""
    if k > 2048:
        raise ValueError("resolution cap k <= 2048")
    if n > 60:
        raise ValueError("horizon cap n <= 60")
    if isinstance(m, TorusMap):
        return _compute_toral(m, hole, k, n)
    if isinstance(m, BakerMap):
        return _compute_baker(m, hole, k, n)
    raise TypeError(f"unsupported map {m!r}")


def _compute_toral(m: TorusMap, hole: Hole, k: int, n: int) -> SurvivorApprox:
    copies = _hole_copies(hole)
    max_diam = max((d for (_, d) in copies), default=0.0)
    retained = np.ones(k * k, dtype=bool)
    counts = [k * k]
    if not copies:
        return SurvivorApprox(k, 0, retained, counts, True)
    ix, iy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    base0 = np.column_stack([ix.ravel() / k, iy.ravel() / k])
    fwd = np.eye(2)
    amat = m.matrix.astype(float)
    ainv = m.inverse_matrix.astype(float)
    live_dirs = {1: True, -1: True}
    mats = {1: np.eye(2), -1: np.eye(2)}
    for step in range(0, n + 1):
        for sgn in (1, -1):
            if step == 0 and sgn == -1:
                continue  # step 0 is direction independent
            if not live_dirs[sgn]:
                continue
            mat = mats[sgn]
            e1 = mat @ np.array([1.0 / k, 0.0])
            e2 = mat @ np.array([0.0, 1.0 / k])
            diam = float(np.hypot(*(np.abs(e1) + np.abs(e2))))
            if diam > max_diam + 1e-12:
                live_dirs[sgn] = False
                continue
            act = np.flatnonzero(retained)
            if len(act) == 0:
                break
            base = base0[act] @ mat.T
            excl = _exclude_parallelograms(base, e1, e2, copies)
            if excl.any():
                retained[act[excl]] = False
        for sgn in (1, -1):
            mats[sgn] = (amat if sgn == 1 else ainv) @ mats[sgn]
        counts.append(int(retained.sum()))
        if not (live_dirs[1] or live_dirs[-1]):
            return SurvivorApprox(k, step, retained, counts, True)
        if not retained.any():
            return SurvivorApprox(k, step, retained, counts, True)
    return SurvivorApprox(k, n, retained, counts, not (live_dirs[1] or live_dirs[-1]))


def _rect_inside_hole(rects, copies) -> bool:
    """Every rectangle of the list sits inside some hole component copy."""
    for (x0, x1, y0, y1) in rects:
        sx = np.floor((x0 + x1) / 2)
        sy = np.floor((y0 + y1) / 2)
        quad = np.array([[x0 - sx, y0 - sy], [x1 - sx, y0 - sy],
                         [x1 - sx, y1 - sy], [x0 - sx, y1 - sy]])
        ok = False
        for (q, _) in copies:
            if geo.convex_contains_polygon(q, quad, tol=1e-12):
                ok = True
                break
        if not ok:
            return False
    return True


def _baker_step(rects, km: int, forward: bool):
    """Exact image of a rectangle list under the baker map or its inverse."""
    out = []
    for (x0, x1, y0, y1) in rects:
        if forward:
            cuts = [x0] + [b / km for b in range(1, km) if x0 < b / km < x1] + [x1]
            for a, b in zip(cuts[:-1], cuts[1:]):
                br = int(np.floor(a * km + 1e-12)) % km
                out.append((km * a - br, km * b - br,
                            (y0 + br) / km, (y1 + br) / km))
        else:
            cuts = [y0] + [b / km for b in range(1, km) if y0 < b / km < y1] + [y1]
            for a, b in zip(cuts[:-1], cuts[1:]):
                br = int(np.floor(a * km + 1e-12)) % km
                out.append(((x0 + br) / km, (x1 + br) / km,
                            km * a - br, km * b - br))
    return out


def _compute_baker(m: BakerMap, hole: Hole, k: int, n: int) -> SurvivorApprox:
    copies = _hole_copies(hole)
    retained = np.ones(k * k, dtype=bool)
    counts = [k * k]
    if not copies:
        return SurvivorApprox(k, 0, retained, counts, True)
    km = m.k
    cells = {}
    for idx in range(k * k):
        ix, iy = divmod(idx, k)
        cells[idx] = {
            1: [(ix / k, (ix + 1) / k, iy / k, (iy + 1) / k)],
            -1: [(ix / k, (ix + 1) / k, iy / k, (iy + 1) / k)],
        }
    for idx in list(cells):
        if _rect_inside_hole(cells[idx][1], copies):
            retained[idx] = False
            del cells[idx]
    counts.append(int(retained.sum()))
    for step in range(1, n + 1):
        alive_any = False
        for idx in list(cells):
            state = cells[idx]
            for sgn in (1, -1):
                if state[sgn] is None:
                    continue
                rects = _baker_step(state[sgn], km, forward=(sgn == 1))
                if len(rects) > PIECE_CAP:
                    state[sgn] = None  # too fragmented: stop, keep the cell
                    continue
                state[sgn] = rects
                alive_any = True
                if _rect_inside_hole(rects, copies):
                    retained[idx] = False
                    del cells[idx]
                    break
        counts.append(int(retained.sum()))
        if not alive_any:
            # every piece list hit the cap: no further exclusion possible
            return SurvivorApprox(k, step, retained, counts, True)
    return SurvivorApprox(k, n, retained, counts, False)


def boundary_gap(approx: SurvivorApprox, hole: Hole) -> float:
    """Minimum torus distance between the hole boundary and the retained
    cell union; +inf when either side is empty."""
    if hole.is_empty or not approx.retained.any():
        return float("inf")
    segs = _merged_boundary_segments(hole)
    ea, eb = geo._torus_elements(segs)
    boxes = approx.retained_boxes()
    best = np.inf
    for j in range(len(ea)):
        d = _segment_to_boxes_distance(ea[j], eb[j], boxes)
        best = min(best, d)
        if best == 0.0:
            break
    return float(best)


def _segment_to_boxes_distance(a: np.ndarray, b: np.ndarray, boxes: np.ndarray) -> float:
    """Exact min distance from segment ab to a set of axis boxes."""
    x0, x1, y0, y1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]

    def endpoint_to_boxes(p):
        dx = np.maximum(np.maximum(x0 - p[0], p[0] - x1), 0.0)
        dy = np.maximum(np.maximum(y0 - p[1], p[1] - y1), 0.0)
        return np.hypot(dx, dy)

    best = float(min(endpoint_to_boxes(a).min(), endpoint_to_boxes(b).min()))
    if best == 0.0:
        return 0.0
    corners = [np.column_stack([x0, y0]), np.column_stack([x1, y0]),
               np.column_stack([x1, y1]), np.column_stack([x0, y1])]
    for co in corners:
        best = min(best, float(geo.seg_point_distance(a, b, co).min()))
        if best == 0.0:
            return 0.0
    # segment may pierce a box without endpoints inside: detect via
    # orientation sign changes of the corners relative to the segment line
    d = b - a
    signs = [np.sign(d[0] * (co[:, 1] - a[1]) - d[1] * (co[:, 0] - a[0]))
             for co in corners]
    straddle = np.zeros(len(boxes), dtype=bool)
    smin = np.minimum.reduce(signs)
    smax = np.maximum.reduce(signs)
    straddle = (smin < 0) & (smax > 0)
    # and the segment's parameter range must overlap the box
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    overlap = ((x0 <= hi[0]) & (x1 >= lo[0]) & (y0 <= hi[1]) & (y1 >= lo[1]))
    if np.any(straddle & overlap):
        return 0.0
    return best


def classify_family(family: HoleFamily, t_samples, k: int, n: int,
                    m: Map | None = None):
    """Per-parameter GAP / TOUCH / UNDECIDED flags.

    GAP: the gap stabilized at or above one cell width.  TOUCH: gap below
    one cell width.  UNDECIDED: positive gap that had not stabilized.
    Returns (flags, gaps, gap_fraction).
    """
    m = m if m is not None else family.map
    if m is None:
        raise ValueError("classify_family needs the underlying map")
    flags = []
    gaps = []
    cell_w = 1.0 / k
    for t in t_samples:
        hole = family(t)
        if hole.is_empty:
            flags.append("GAP")
            gaps.append(float("inf"))
            continue
        approx = compute(m, hole, k, n)
        g = boundary_gap(approx, hole)
        gaps.append(g)
        if g < cell_w:
            flags.append("TOUCH")
        elif approx.stabilized or _history_settled(approx.counts_history):
            flags.append("GAP")
        else:
            flags.append("UNDECIDED")
    frac = sum(1 for f in flags if f == "GAP") / max(1, len(flags))
    return flags, np.asarray(gaps), frac


def _history_settled(history, rel_tol: float = 0.01) -> bool:
    if len(history) < 3:
        return True
    prev, cur = history[-2], history[-1]
    return prev == 0 or (prev - cur) / prev < rel_tol
