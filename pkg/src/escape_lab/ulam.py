"""Grid discretization of the transfer operator with hole masking.

The operator is a row-substochastic matrix P[i][j] = area(B_i n f^-1 B_j) /
area(B_i) on k x k grid boxes.  Masking zeroes the rows and columns of cells
inside the hole; the leading eigenvalue of the masked operator estimates the
survival factor per step and log of it the escape rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry as geo
from . import holes as holes_mod
from .dynsys import BakerMap, Map, TorusMap, apply_many
from .linalg import ConvergenceError, power_iteration

NNZ_CAP = 60_000_000


class ResolutionCapError(ValueError):
    pass


class FullyMaskedError(ValueError):
    pass


@dataclass(frozen=True)
class UlamOperator:
    k: int
    entries: sp.csr_matrix
    hole_mask: frozenset
    build_mode: str
    map: Map

    @property
    def n_cells(self) -> int:
        return self.k * self.k

    def cell_index(self, ix: int, iy: int) -> int:
        return ix * self.k + iy

    def cell_box(self, idx: int):
        ix, iy = divmod(idx, self.k)
        k = self.k
        return np.array([[ix / k, iy / k], [(ix + 1) / k, iy / k],
                         [(ix + 1) / k, (iy + 1) / k], [ix / k, (iy + 1) / k]])

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.entries.sum(axis=1)).ravel()


@dataclass(frozen=True)
class SpectralResult:
    r_lead: float
    qsd: np.ndarray
    gap_proxy: float
    iterations: int
    residual: float


def build(m: Map, k: int, mode: str = "exact", samples_per_box: int = 8) -> UlamOperator:
    """Assemble the unmasked transition matrix at resolution k.

    Exact mode clips the affine image of one reference box against the grid
    (the overlap pattern is translation invariant for integer matrices) and
    stamps it across all rows; sampled mode pushes an s x s point grid per box.
    """
    if not 2 <= k <= 4096:
        raise ResolutionCapError(f"grid resolution k={k} outside [2, 4096]")
    if mode == "exact":
        if isinstance(m, TorusMap):
            mat = _build_toral_exact(m, k)
        elif isinstance(m, BakerMap):
            mat = _build_baker_exact(m, k)
        else:
            raise TypeError("exact mode requires an affine map")
    elif mode == "sampled":
        mat = _build_sampled(m, k, samples_per_box)
    else:
        raise ValueError(f"unknown build mode {mode!r}")
    return UlamOperator(k=k, entries=mat, hole_mask=frozenset(), build_mode=mode, map=m)


def _build_toral_exact(m: TorusMap, k: int) -> sp.csr_matrix:
    a = m.matrix
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]) / k
    image = corners @ a.T.astype(float)
    image = geo.ensure_ccw(image)
    lo = np.floor(image.min(axis=0) * k).astype(int)
    hi = np.ceil(image.max(axis=0) * k).astype(int)
    pattern = []
    for dx in range(lo[0], hi[0] + 1):
        for dy in range(lo[1], hi[1] + 1):
            cell = np.array([[dx, dy], [dx + 1, dy], [dx + 1, dy + 1], [dx, dy + 1]]) / k
            w = geo.clip_area(image, cell) * k * k
            if w > 1e-14:
                pattern.append((dx, dy, w))
    if len(pattern) * k * k > NNZ_CAP:
        raise ResolutionCapError("operator too large; lower k")
    ix, iy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    rows_base = (ix * k + iy).ravel()
    tx = a[0, 0] * ix + a[0, 1] * iy
    ty = a[1, 0] * ix + a[1, 1] * iy
    rows, cols, data = [], [], []
    for (dx, dy, w) in pattern:
        cx = np.mod(tx + dx, k)
        cy = np.mod(ty + dy, k)
        rows.append(rows_base)
        cols.append((cx * k + cy).ravel())
        data.append(np.full(k * k, w))
    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(k * k, k * k))
    return mat.tocsr()


def _build_baker_exact(m: BakerMap, k: int) -> sp.csr_matrix:
    km = m.k
    rows, cols, data = [], [], []
    iy = np.arange(k)
    for ix in range(k):
        x0, x1 = ix / k, (ix + 1) / k
        cuts = [x0] + [b / km for b in range(1, km) if x0 < b / km < x1] + [x1]
        for p0, p1 in zip(cuts[:-1], cuts[1:]):
            branch = int(np.floor(p0 * km + 1e-12))
            # image rectangle: x' in [km*p0 - branch, km*p1 - branch),
            # y' in [(iy/k + branch)/km, ((iy+1)/k + branch)/km)
            xa, xb = km * p0 - branch, km * p1 - branch
            ya = (iy / k + branch) / km
            yb = ((iy + 1) / k + branch) / km
            jx_lo = int(np.floor(xa * k + 1e-12))
            jx_hi = int(np.ceil(xb * k - 1e-12))
            for jx in range(jx_lo, jx_hi):
                wx = (min(xb, (jx + 1) / k) - max(xa, jx / k)) * k
                if wx <= 1e-14:
                    continue
                jy_lo = np.floor(ya * k + 1e-12).astype(int)
                jy_hi = np.ceil(yb * k - 1e-12).astype(int)
                for shift in range(int((jy_hi - jy_lo).max())):
                    jy = jy_lo + shift
                    ow = (np.minimum(yb, (jy + 1) / k) - np.maximum(ya, jy / k)) * k
                    ow = np.clip(ow, 0.0, None)
                    # weight = overlap area / box area = (wx/k)*(ow/k)*k^2
                    w = wx * ow
                    good = ow > 1e-14
                    rows.append((ix * k + iy[good]))
                    cols.append((jx % k) * k + (jy[good] % k))
                    data.append(w[good])
    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(k * k, k * k))
    return mat.tocsr()


def _build_sampled(m: Map, k: int, s: int) -> sp.csr_matrix:
    if s < 2:
        raise ValueError("samples_per_box must be >= 2")
    offs = (np.arange(s) + 0.5) / (s * k)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    rows_all, cols_all = [], []
    for ix in range(k):
        base_x = ix / k
        for iy_block in range(k):
            pts = np.column_stack([
                (base_x + ox.ravel()),
                (iy_block / k + oy.ravel()),
            ])
            out = apply_many(m, pts)
            jx = np.floor(out[:, 0] * k).astype(int) % k
            jy = np.floor(out[:, 1] * k).astype(int) % k
            rows_all.append(np.full(s * s, ix * k + iy_block))
            cols_all.append(jx * k + jy)
    data = np.full(k * k * s * s, 1.0 / (s * s))
    mat = sp.coo_matrix(
        (data, (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(k * k, k * k))
    return mat.tocsr()


def classify_cells(op: UlamOperator, hole: holes_mod.Hole, cell_rule: str = "interior") -> np.ndarray:
    """Indices of grid cells counted as inside the hole."""
    k = op.k
    if hole.is_empty:
        return np.empty(0, dtype=int)
    if cell_rule == "majority":
        ix, iy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        centers = np.column_stack([(ix.ravel() + 0.5) / k, (iy.ravel() + 0.5) / k])
        return np.flatnonzero(holes_mod.contains_many(hole, centers))
    if cell_rule != "interior":
        raise ValueError("cell_rule must be 'interior' or 'majority'")
    ix, iy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    x0 = ix.ravel() / k
    y0 = iy.ravel() / k
    corners = [np.column_stack([x0 + dx / k, y0 + dy / k])
               for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1))]
    masked = np.zeros(k * k, dtype=bool)
    for q in hole.bounding_boxes():
        inside_all = np.ones(k * k, dtype=bool)
        for co in corners:
            inside_all &= geo.point_in_convex(q, co, strict=False)
            if not inside_all.any():
                break
        masked |= inside_all
    return np.flatnonzero(masked)


def mask(op: UlamOperator, hole: holes_mod.Hole, cell_rule: str = "interior") -> UlamOperator:
    """Zero the rows and columns of cells classified as inside the hole."""
    if op.hole_mask:
        raise ValueError("operator is already masked")
    masked = classify_cells(op, hole, cell_rule)
    if len(masked) == op.n_cells:
        raise FullyMaskedError("every cell is inside the hole")
    if len(masked) == 0:
        return UlamOperator(op.k, op.entries, frozenset(), op.build_mode, op.map)
    keep = np.ones(op.n_cells)
    keep[masked] = 0.0
    d = sp.diags(keep)
    newmat = (d @ op.entries @ d).tocsr()
    newmat.eliminate_zeros()
    return UlamOperator(op.k, newmat, frozenset(masked.tolist()), op.build_mode, op.map)


def leading(op: UlamOperator, tol: float = 1e-12, residual_tol: float = 1e-10,
            maxit: int = 100_000) -> SpectralResult:
    """Leading eigenvalue and quasi-stationary density by power iteration.

    Acts on the transpose (left eigenvector: measure evolution); L1
    normalized; deterministic for a fixed operator.
    """
    n = op.n_cells
    unmasked = np.ones(n, dtype=bool)
    if op.hole_mask:
        unmasked[list(op.hole_mask)] = False
    live = unmasked & (np.asarray(op.entries.sum(axis=1)).ravel() > 0)
    if not live.any():
        raise FullyMaskedError("no unmasked cell with a nonzero row")
    start = unmasked.astype(float)
    pt = op.entries.T.tocsr()
    try:
        res = power_iteration(lambda v: pt @ v, n, start=start, tol=tol,
                              residual_tol=residual_tol, maxit=maxit)
    except ConvergenceError as err:
        p = err.partial
        raise ConvergenceError(
            str(err),
            SpectralResult(p.value, p.vector, p.gap_proxy, p.iterations, p.residual),
        ) from None
    return SpectralResult(res.value, res.vector, res.gap_proxy,
                          res.iterations, res.residual)


def escape_rate(sr) -> float:
    """rho = log(leading eigenvalue) <= 0; -inf when the eigenvalue is 0."""
    r = sr.r_lead if isinstance(sr, SpectralResult) else float(sr)
    if r < 0:
        raise ValueError("leading eigenvalue must be nonnegative")
    if r == 0.0:
        return float("-inf")
    return float(np.log(r))
