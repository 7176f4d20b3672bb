"""Markov-partition calculus: refinement, survivor subshifts, pressures.

Partitions are kept in eigenframe coordinates (z along the expanding
direction, w along the contracting one) where every cell is an axis-aligned
box and the map acts diagonally.  A partition scheme stores the seed boxes
plus the crossing multigraph; refined cells are paths in that multigraph,
so adjacency is pure combinatorics and cell geometry is interval
arithmetic.

The baker seed is the set of k vertical strips (the full shift on k
symbols).  The cat-map seed is a two-box fundamental domain derived from
the golden natural extension:

    c = sqrt(2 + phi),  alpha = c*phi/sqrt(5),  gamma = alpha/phi
    B1 = [0, alpha) x [0, gamma/phi)
    B2 = [0, alpha/phi) x [gamma/phi, gamma)

in the orthonormal frame u = (phi, 1)/c, s = (1, -phi)/c.  The scheme is
re-certified at construction time: image boxes must decompose exactly into
full-width slabs of cells shifted by true lattice vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import geometry as geo
from .dynsys import BakerMap, Map, TorusMap, CAT_MATRIX
from .holes import Hole
from .linalg import spectral_radius

CELL_CAP = 1_000_000
NEG_INF = float("-inf")


class UnsupportedMapError(ValueError):
    """No certified seed partition is available for this map."""


class CertificationError(RuntimeError):
    """Seed scheme failed the exact Markov checks."""


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    a: float      # z-piece [a, b) of the image of node src (image coords)
    b: float
    dz: float     # lattice shift: z' = lam*z - dz lands in node dst
    dw: float     # and w' = lam_s*w - dw


@dataclass(frozen=True)
class Scheme:
    """Seed boxes plus the crossing multigraph of a Markov partition."""

    nodes: tuple          # (z0, z1, w0, w1) per node
    edges: tuple          # Edge
    lam: float            # expanding eigenvalue (positive)
    lam_s: float          # contracting eigenvalue (positive)
    frame_u: np.ndarray   # torus vector of the z axis
    frame_s: np.ndarray   # torus vector of the w axis

    def out_edges(self, node: int):
        return [e for e in self.edges if e.src == node]

    def in_edges(self, node: int):
        return [e for e in self.edges if e.dst == node]

    def to_torus(self, z, w) -> np.ndarray:
        return np.outer(np.atleast_1d(z), self.frame_u) + np.outer(np.atleast_1d(w), self.frame_s)


def certify_scheme(s: Scheme, lattice_basis: np.ndarray | None, tol: float = 1e-9):
    """Exact Markov checks: full-width z pieces, nested w slabs that tile,
    and genuinely integral lattice shifts."""
    for i, (z0, z1, w0, w1) in enumerate(s.nodes):
        outs = sorted(s.out_edges(i), key=lambda e: e.a)
        if not outs:
            raise CertificationError(f"node {i} has no out-edges")
        if abs(outs[0].a - s.lam * z0) > tol or abs(outs[-1].b - s.lam * z1) > tol:
            raise CertificationError(f"image of node {i} not fully decomposed")
        for e0, e1 in zip(outs[:-1], outs[1:]):
            if abs(e0.b - e1.a) > tol:
                raise CertificationError(f"gap/overlap in image pieces of node {i}")
        for e in outs:
            tz0, tz1 = s.nodes[e.dst][0], s.nodes[e.dst][1]
            if abs((e.a - e.dz) - tz0) > tol or abs((e.b - e.dz) - tz1) > tol:
                raise CertificationError(
                    f"edge {e} does not stretch fully across node {e.dst}")
            sw0 = s.lam_s * w0 - e.dw
            sw1 = s.lam_s * w1 - e.dw
            if sw0 < s.nodes[e.dst][2] - tol or sw1 > s.nodes[e.dst][3] + tol:
                raise CertificationError(f"w slab of edge {e} leaves node {e.dst}")
    for j, (z0, z1, w0, w1) in enumerate(s.nodes):
        slabs = []
        for e in s.in_edges(j):
            sw0 = s.lam_s * s.nodes[e.src][2] - e.dw
            sw1 = s.lam_s * s.nodes[e.src][3] - e.dw
            slabs.append((sw0, sw1))
        slabs.sort()
        if abs(slabs[0][0] - w0) > tol or abs(slabs[-1][1] - w1) > tol:
            raise CertificationError(f"w slabs do not tile node {j}")
        for (a0, b0), (a1, b1) in zip(slabs[:-1], slabs[1:]):
            if abs(b0 - a1) > tol:
                raise CertificationError(f"w slabs gap/overlap in node {j}")
    if lattice_basis is not None:
        inv = np.linalg.inv(lattice_basis)
        for e in s.edges:
            mn = inv @ np.array([e.dz, e.dw])
            if np.abs(mn - np.round(mn)).max() > tol:
                raise CertificationError(f"shift of edge {e} is not a lattice vector")


def _golden_scheme() -> Scheme:
    phi = (1 + np.sqrt(5.0)) / 2
    c = np.sqrt(2 + phi)
    uhat = np.array([phi, 1.0]) / c
    shat = np.array([1.0, -phi]) / c
    alpha = c * phi / np.sqrt(5.0)
    gamma = alpha / phi
    lam = phi * phi
    nodes = (
        (0.0, alpha, 0.0, gamma / phi),
        (0.0, alpha / phi, gamma / phi, gamma),
    )
    # lattice in (z, w) coordinates: columns are images of (1,0), (0,1)
    basis = np.column_stack([
        [uhat @ np.array([1.0, 0.0]), shat @ np.array([1.0, 0.0])],
        [uhat @ np.array([0.0, 1.0]), shat @ np.array([0.0, 1.0])],
    ])
    edges = _derive_edges(nodes, lam, 1.0 / lam, basis)
    s = Scheme(nodes=nodes, edges=tuple(edges), lam=lam, lam_s=1.0 / lam,
               frame_u=uhat, frame_s=shat)
    certify_scheme(s, basis)
    return s


def _derive_edges(nodes, lam, lam_s, basis) -> list:
    """Find the crossing pieces of each image box against lattice-translated
    cells; raises if any image area is left over."""
    edges = []
    rng = range(-6, 7)
    lattice = [basis @ np.array([m, n]) for m in rng for n in rng]
    for i, (z0, z1, w0, w1) in enumerate(nodes):
        iz0, iz1 = lam * z0, lam * z1
        iw0, iw1 = lam_s * w0, lam_s * w1
        covered = 0.0
        for j, (tz0, tz1, tw0, tw1) in enumerate(nodes):
            for vec in lattice:
                oz0, oz1 = max(iz0, tz0 + vec[0]), min(iz1, tz1 + vec[0])
                ow0, ow1 = max(iw0, tw0 + vec[1]), min(iw1, tw1 + vec[1])
                if oz1 - oz0 > 1e-11 and ow1 - ow0 > 1e-11:
                    edges.append(Edge(src=i, dst=j, a=oz0, b=oz1,
                                      dz=float(vec[0]), dw=float(vec[1])))
                    covered += (oz1 - oz0) * (ow1 - ow0)
        if abs(covered - (iz1 - iz0) * (iw1 - iw0)) > 1e-9:
            raise CertificationError(f"image of node {i} not fully covered")
    return edges


def _baker_scheme(k: int) -> Scheme:
    nodes = tuple((j / k, (j + 1) / k, 0.0, 1.0) for j in range(k))
    edges = []
    for i in range(k):
        # image of strip i is [i, i+1) in unwrapped x; strip j sits at
        # offset i + j/k, shifted back by dz = i + j/k - j/k ... = i
        for j in range(k):
            a = i + j / k
            b = i + (j + 1) / k
            edges.append(Edge(src=i, dst=j, a=a, b=b, dz=float(i),
                              dw=-i / k))
    s = Scheme(nodes=nodes, edges=tuple(edges), lam=float(k), lam_s=1.0 / k,
               frame_u=np.array([1.0, 0.0]), frame_s=np.array([0.0, 1.0]))
    certify_scheme(s, None)
    return s


def seed_partition(m: Map) -> "MarkovPartition":
    """Certified seed partition: golden two-box scheme for the standard cat
    map, vertical strips for the baker map."""
    if isinstance(m, BakerMap):
        return MarkovPartition(m, _baker_scheme(m.k), 0, 0)
    if isinstance(m, TorusMap):
        if np.array_equal(m.matrix, CAT_MATRIX):
            return MarkovPartition(m, _golden_scheme(), 0, 0)
        raise UnsupportedMapError(
            "certified Markov seed available only for [[2,1],[1,1]] "
            "(orientation-reversing and general matrices unsupported)")
    raise UnsupportedMapError(f"no partition scheme for {m!r}")


class MarkovPartition:
    """Refinement of a seed scheme; cells are edge paths in the multigraph.

    A cell at depth (df, db) is a path of df + db edges; the present sits
    after the first db edges.  The z extent comes from the future chain of
    the path, the w extent from the past chain, so cell geometry is exact
    interval arithmetic.
    """

    def __init__(self, m: Map, scheme: Scheme, df: int, db: int):
        self.map = m
        self.scheme = scheme
        self.df = df
        self.db = db
        self.paths = self._enumerate_paths(df + db)
        self._index = {p: i for i, p in enumerate(self.paths)}
        if len(self.paths) > CELL_CAP:
            raise ValueError(f"cell count {len(self.paths)} exceeds cap {CELL_CAP}")

    # -- structure ---------------------------------------------------------

    def _enumerate_paths(self, depth: int):
        if depth == 0:
            return [(("node", i),) for i in range(len(self.scheme.nodes))]
        outs = {i: [k for k, e in enumerate(self.scheme.edges) if e.src == i]
                for i in range(len(self.scheme.nodes))}
        paths = [(k,) for i in outs for k in outs[i]]
        for _ in range(depth - 1):
            nxt = []
            for p in paths:
                tail = self.scheme.edges[p[-1]].dst
                for k in outs[tail]:
                    nxt.append(p + (k,))
                if len(nxt) > CELL_CAP:
                    raise ValueError("cell count cap exceeded during refinement")
            paths = nxt
        return paths

    @property
    def depth(self) -> int:
        """Number of join factors: the seed counts as depth 1."""
        return self.df + self.db + 1

    @property
    def n_cells(self) -> int:
        return len(self.paths)

    def cell_node(self, path) -> int:
        """Seed node holding the cell (the present position of the path)."""
        if isinstance(path[0], tuple):  # depth-0 sentinel ("node", i)
            return path[0][1]
        edges = self.scheme.edges
        if self.db == 0:
            return edges[path[0]].src
        return edges[path[self.db - 1]].dst

    def cell_box(self, idx: int):
        """(z0, z1, w0, w1) of cell idx, in eigenframe coordinates."""
        path = self.paths[idx]
        s = self.scheme
        if isinstance(path[0], tuple) and path[0][0] == "node":
            return s.nodes[path[0][1]]
        edges = [s.edges[k] for k in path]
        node = self.cell_node(path)
        z0, z1, w0, w1 = s.nodes[node]
        # future chain: edges[db:], iterated from the far end back
        fz0, fz1 = None, None
        for e in reversed(edges[self.db:]):
            if fz0 is None:
                tz = s.nodes[e.dst]
                fz0, fz1 = tz[0], tz[1]
            fz0 = (fz0 + e.dz) / s.lam
            fz1 = (fz1 + e.dz) / s.lam
        if fz0 is None:
            fz0, fz1 = z0, z1
        # past chain: edges[:db], iterated forward from the far past
        pw0, pw1 = None, None
        for e in edges[:self.db]:
            if pw0 is None:
                sw = s.nodes[e.src]
                pw0, pw1 = sw[2], sw[3]
            pw0 = s.lam_s * pw0 - e.dw
            pw1 = s.lam_s * pw1 - e.dw
        if pw0 is None:
            pw0, pw1 = w0, w1
        return (fz0, fz1, min(pw0, pw1), max(pw0, pw1))

    def cell_polygon(self, idx: int) -> np.ndarray:
        z0, z1, w0, w1 = self.cell_box(idx)
        corners = self.scheme.to_torus(
            np.array([z0, z1, z1, z0]), np.array([w0, w0, w1, w1]))
        return geo.ensure_ccw(corners)

    def cell_diameter(self, idx: int) -> float:
        z0, z1, w0, w1 = self.cell_box(idx)
        return float(np.hypot(z1 - z0, w1 - w0))

    def adjacency(self) -> sp.csr_matrix:
        """0/1 transition matrix: cell -> cell reachable in one step."""
        n = self.n_cells
        if self.df + self.db == 0:
            rows, cols = [], []
            for i, p in enumerate(self.paths):
                src = p[0][1]
                for e in self.scheme.edges:
                    if e.src == src:
                        rows.append(i)
                        cols.append(e.dst)
            return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        outs = {i: [k for k, e in enumerate(self.scheme.edges) if e.src == i]
                for i in range(len(self.scheme.nodes))}
        rows, cols = [], []
        for i, p in enumerate(self.paths):
            tail = self.scheme.edges[p[-1]].dst
            for k in outs[tail]:
                q = p[1:] + (k,)
                j = self._index.get(q)
                if j is not None:
                    rows.append(i)
                    cols.append(j)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def refine(partition: MarkovPartition, extra_depth: int) -> MarkovPartition:
    """Pull back the partition: forward-only for the baker (x strips),
    alternating forward/backward for toral maps so diameters shrink in
    both directions."""
    df, db = partition.df, partition.db
    if isinstance(partition.map, BakerMap):
        df += extra_depth
    else:
        for _ in range(extra_depth):
            if df <= db:
                df += 1
            else:
                db += 1
    return MarkovPartition(partition.map, partition.scheme, df, db)


# -- subshift models -------------------------------------------------------


@dataclass
class SubshiftModel:
    """0/1 transition matrix with per-state expansion weights."""

    A: sp.csr_matrix
    weights: np.ndarray
    state_to_cell: np.ndarray  # original cell index per state
    log_lambda: float

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def weighted(self) -> sp.csr_matrix:
        return sp.diags(self.weights) @ self.A


def subshift_from_partition(partition: MarkovPartition) -> SubshiftModel:
    lam = abs(partition.scheme.lam)
    n = partition.n_cells
    return SubshiftModel(
        A=partition.adjacency(),
        weights=np.full(n, 1.0 / lam),
        state_to_cell=np.arange(n),
        log_lambda=float(np.log(lam)),
    )


def restrict(model: SubshiftModel, hole_states) -> SubshiftModel:
    """Remove the named rows/columns: the survivor subshift."""
    hole = set(int(h) for h in hole_states)
    keep = np.array([i for i in range(model.n_states) if i not in hole], dtype=int)
    if len(keep) == 0:
        raise ValueError("restriction removed every state")
    if len(keep) == model.n_states:
        return model
    a = model.A[keep][:, keep].tocsr()
    return SubshiftModel(A=a, weights=model.weights[keep],
                         state_to_cell=model.state_to_cell[keep],
                         log_lambda=model.log_lambda)


def pressure(model: SubshiftModel) -> float:
    """log spectral radius of diag(w) A; -inf for an empty/nilpotent model.

    With constant weights 1/lambda this is the topological pressure of
    -log|det Df^u| on the subshift (variational principle for SFTs).
    """
    w = model.weighted()
    r = spectral_radius(w)
    if r <= 0.0:
        return NEG_INF
    return float(np.log(r))


def max_mean_cycle_pressure(model: SubshiftModel, excluded_states=()) -> tuple:
    """Best zero-entropy (periodic orbit) pressure on the survivor graph.

    Karp's maximum mean cycle with per-edge weight log w(src); returns
    (value, witness cycle as a tuple of state indices), or (-inf, None)
    when the graph is acyclic.
    """
    excluded = set(int(e) for e in excluded_states)
    keep = np.array([i for i in range(model.n_states) if i not in excluded], dtype=int)
    if len(keep) == 0:
        return NEG_INF, None
    sub = model.A[keep][:, keep].tocsr()
    logw = np.log(model.weights[keep])
    best_val, best_cycle = NEG_INF, None
    ncomp, labels = _strong_components(sub)
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        block = sub[idx][:, idx].tocsr()
        if block.nnz == 0:
            continue
        val, cyc = _karp(block, logw[idx])
        if val > best_val:
            best_val = val
            best_cycle = tuple(int(keep[idx[v]]) for v in cyc)
    return best_val, best_cycle


def _strong_components(a: sp.csr_matrix):
    from scipy.sparse.csgraph import connected_components
    return connected_components(a, directed=True, connection="strong")


def _karp(a: sp.csr_matrix, logw: np.ndarray) -> tuple:
    """Karp's algorithm on a strongly connected weighted graph.

    d[k][v] = max total weight of a k-edge walk from the super-source;
    the maximum mean cycle is max_v min_k (d[n][v]-d[k][v])/(n-k).
    """
    n = a.shape[0]
    heads = [a.indices[a.indptr[i]:a.indptr[i + 1]] for i in range(n)]
    d = np.full((n + 1, n), NEG_INF)
    parent = np.zeros((n + 1, n), dtype=int)
    d[0, :] = 0.0
    for k in range(1, n + 1):
        for u in range(n):
            if d[k - 1, u] == NEG_INF:
                continue
            cand = d[k - 1, u] + logw[u]
            for v in heads[u]:
                if cand > d[k, v]:
                    d[k, v] = cand
                    parent[k, v] = u
    best = NEG_INF
    best_v = -1
    for v in range(n):
        if d[n, v] == NEG_INF:
            continue
        worst = np.inf
        for k in range(n):
            if d[k, v] > NEG_INF:
                worst = min(worst, (d[n, v] - d[k, v]) / (n - k))
        if worst < np.inf and worst > best:
            best = worst
            best_v = v
    if best_v < 0:
        return NEG_INF, None
    walk = [best_v]
    v = best_v
    for k in range(n, 0, -1):
        v = int(parent[k, v])
        walk.append(v)
    walk.reverse()
    seen = {}
    for pos, u in enumerate(walk):
        if u in seen:
            return best, walk[seen[u]:pos]
        seen[u] = pos
    return best, walk[:1]


# -- hole interaction ------------------------------------------------------


def _cell_polys_normalized(partition: MarkovPartition):
    cached = getattr(partition, "_poly_cache", None)
    if cached is not None:
        return cached
    polys = []
    for i in range(partition.n_cells):
        poly = partition.cell_polygon(i)
        poly = poly - np.floor(poly.mean(axis=0))
        polys.append(poly)
    partition._poly_cache = polys
    return polys


def _cell_corner_stack(partition: MarkovPartition) -> np.ndarray:
    cached = getattr(partition, "_corner_cache", None)
    if cached is None:
        cached = np.stack(_cell_polys_normalized(partition))
        partition._corner_cache = cached
    return cached


def hole_states(partition: MarkovPartition, hole: Hole) -> list:
    """Cells whose interior is contained in the hole (closed-hull test on
    the cell corners, per wrap translate)."""
    if hole.is_empty:
        return []
    corners = _cell_corner_stack(partition)  # (n, 4, 2)
    n = len(corners)
    inside_any = np.zeros(n, dtype=bool)
    for q in hole.bounding_boxes():
        inside = np.ones(n, dtype=bool)
        for c in range(corners.shape[1]):
            inside &= geo.point_in_convex(q, corners[:, c, :], strict=False)
            if not inside.any():
                break
        inside_any |= inside
    return [int(i) for i in np.flatnonzero(inside_any)]


def boundary_touching_states(partition: MarkovPartition, hole: Hole,
                             epsilon: float) -> set:
    """States whose cells intersect the open epsilon-neighborhood of the
    hole boundary."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if hole.is_empty:
        return set()
    segs = _merged_boundary_segments(hole)
    ea, eb = geo._torus_elements(segs)
    out = set()
    for i, poly in enumerate(_cell_polys_normalized(partition)):
        lo = poly.min(axis=0)
        hi = poly.max(axis=0)
        # cheap reject: bounding-box distance to all segment endpoints
        mids = 0.5 * (ea + eb)
        dx = np.maximum(np.maximum(lo[0] - np.maximum(ea[:, 0], eb[:, 0]),
                                   np.minimum(ea[:, 0], eb[:, 0]) - hi[0]), 0.0)
        dy = np.maximum(np.maximum(lo[1] - np.maximum(ea[:, 1], eb[:, 1]),
                                   np.minimum(ea[:, 1], eb[:, 1]) - hi[1]), 0.0)
        near = np.flatnonzero(np.hypot(dx, dy) < epsilon)
        for j in near:
            if geo.polygon_to_segment_distance(poly, ea[j], eb[j]) < epsilon:
                out.add(i)
                break
    return out


def _merged_boundary_segments(hole: Hole) -> list:
    """Boundary of the union: edges shared by two components cancel."""
    raw = []
    for poly in hole.components:
        for (a, b) in geo.polygon_segments(poly):
            raw.append((a, b))

    def key(a, b):
        am, bm = a % 1.0, b % 1.0
        pts = sorted([(round(am[0], 9), round(am[1], 9)),
                      (round(bm[0], 9), round(bm[1], 9))])
        return tuple(pts)

    counts = {}
    for (a, b) in raw:
        counts.setdefault(key(a, b), []).append((a, b))
    segs = []
    for v in counts.values():
        if len(v) == 1:
            segs.append(v[0])
    return segs if segs else raw


@dataclass
class PressureReport:
    p_upper: float
    p_lower: float
    orbit_witness: tuple | None
    rho_reference: float
    sp_restricted: float
    n_survivor_states: int
    epsilon: float


def pressure_report(partition: MarkovPartition, hole: Hole,
                    epsilon: float = 1e-3) -> PressureReport:
    """Survivor-subshift pressures for a hole.

    p_upper restricts away cells inside the hole (outer approximation of
    the survivor set); p_lower is the better of the periodic-orbit proxy
    (maximum mean cycle) and the pressure of the sub-subshift at distance
    > epsilon from the hole boundary.
    """
    model = subshift_from_partition(partition)
    inside = hole_states(partition, hole)
    if len(inside) == model.n_states:
        raise ValueError("hole swallows every cell")
    survivor = restrict(model, inside)
    p_up = pressure(survivor)
    sp_restr = float(np.exp(p_up + survivor.log_lambda)) if np.isfinite(p_up) else 0.0

    touching = boundary_touching_states(partition, hole, epsilon)
    inside_set = set(inside)
    surv_index = {int(c): i for i, c in enumerate(survivor.state_to_cell)}
    excl = [surv_index[c] for c in touching if c in surv_index and c not in inside_set]
    mmc_val, cyc = max_mean_cycle_pressure(survivor, excl)
    witness = (tuple(int(survivor.state_to_cell[v]) for v in cyc)
               if cyc is not None else None)
    try:
        far = restrict(survivor, excl)
        p_far = pressure(far)
    except ValueError:
        p_far = NEG_INF
    p_lo = max(mmc_val, p_far)
    return PressureReport(p_upper=p_up, p_lower=p_lo, orbit_witness=witness,
                          rho_reference=p_up, sp_restricted=sp_restr,
                          n_survivor_states=survivor.n_states, epsilon=epsilon)
