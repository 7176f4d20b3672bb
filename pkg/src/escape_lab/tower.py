"""Finite truncation of an exponential-tail tower with cell holes.

The tower is a Markov chain on cells (level, branch): mass climbs one level
per step inside a branch and returns to the base at the branch's return
time, redistributing over branches by their base widths.  Branches taller
than the truncation level feed a tail state whose handling (absorb or
reflect) brackets the untruncated leading eigenvalue.  Opening a hole
zeroes the rows and columns of the removed cells, and the leading
eigenvalue of the open operator gives the escape rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.sparse as sp

from .linalg import ConvergenceError, power_iteration, spectral_radius


@dataclass(frozen=True)
class TowerSpec:
    branches: tuple            # (width, return_time) pairs
    C: float
    theta: float
    L: int                     # truncation level

    def __post_init__(self):
        widths = np.array([w for (w, _) in self.branches], dtype=float)
        returns = [int(r) for (_, r) in self.branches]
        if abs(widths.sum() - 1.0) > 1e-12:
            raise ValueError("branch widths must sum to 1")
        if min(returns) < 1:
            raise ValueError("return times must be >= 1")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        for n in range(0, max(returns) + 1):
            tail = widths[[r > n for r in returns]].sum()
            if tail > self.C * self.theta ** n + 1e-12:
                raise ValueError(f"tail bound violated at n={n}: "
                                 f"{tail} > C theta^n")

    @property
    def widths(self) -> np.ndarray:
        return np.array([w for (w, _) in self.branches], dtype=float)

    @property
    def returns(self) -> list:
        return [int(r) for (_, r) in self.branches]

    @property
    def mixing(self) -> bool:
        g = 0
        for r in self.returns:
            g = gcd(g, r)
        return g == 1

    @property
    def truncation_error(self) -> float:
        return self.C * self.theta ** self.L / (1.0 - self.theta)


@dataclass(frozen=True)
class TowerHole:
    cells: frozenset           # (level, branch) pairs

    def __init__(self, cells):
        object.__setattr__(self, "cells", frozenset((int(l), int(j)) for (l, j) in cells))

    @property
    def opening_level(self):
        return min((l for (l, _) in self.cells), default=None)


@dataclass
class TowerOperator:
    spec: TowerSpec
    matrix: sp.csr_matrix
    cells: list                # (level, branch) per matrix index
    index: dict
    tail_mode: str             # absorb | reflect
    hole: TowerHole | None = None

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def surviving_branches(self) -> list:
        removed = self.hole.cells if self.hole else frozenset()
        out = []
        for j, r in enumerate(self.spec.returns):
            top = min(r, self.spec.L + 1)
            if all((l, j) not in removed for l in range(top)):
                out.append(j)
        return out

    def surviving_mixing(self) -> bool:
        g = 0
        for j in self.surviving_branches():
            if self.spec.returns[j] <= self.spec.L:
                g = gcd(g, self.spec.returns[j])
        return g == 1


def build(spec: TowerSpec, tail_mode: str = "absorb") -> TowerOperator:
    """Assemble the truncated tower chain."""
    if tail_mode not in ("absorb", "reflect"):
        raise ValueError("tail_mode must be 'absorb' or 'reflect'")
    cells = []
    for j, r in enumerate(spec.returns):
        for level in range(min(r, spec.L + 1)):
            cells.append((level, j))
    if len(cells) > 1_000_000:
        raise ValueError("tower cell cap exceeded")
    index = {c: i for i, c in enumerate(cells)}
    widths = spec.widths
    rows, cols, data = [], [], []
    for (level, j) in cells:
        i = index[(level, j)]
        r = spec.returns[j]
        if level == r - 1:
            for j2, w2 in enumerate(widths):
                rows.append(i)
                cols.append(index[(0, j2)])
                data.append(w2)
        elif level == spec.L:
            if tail_mode == "reflect":
                for j2, w2 in enumerate(widths):
                    rows.append(i)
                    cols.append(index[(0, j2)])
                    data.append(w2)
            # absorb: the top truncated cell has no outgoing mass
        else:
            rows.append(i)
            cols.append(index[(level + 1, j)])
            data.append(1.0)
    n = len(cells)
    mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return TowerOperator(spec=spec, matrix=mat, cells=cells, index=index,
                         tail_mode=tail_mode)


class BaseRemovedError(ValueError):
    pass


def open_hole(op: TowerOperator, hole: TowerHole) -> TowerOperator:
    """Mask the hole cells (rows and columns zeroed)."""
    for c in hole.cells:
        if c not in op.index:
            raise ValueError(f"hole cell {c} outside the truncated tower")
    base = [op.index[(0, j)] for j in range(len(op.spec.branches))]
    if all((0, j) in hole.cells for j in range(len(op.spec.branches))):
        raise BaseRemovedError("every base cell removed")
    keep = np.ones(op.n_cells)
    for c in hole.cells:
        keep[op.index[c]] = 0.0
    d = sp.diags(keep)
    mat = (d @ op.matrix @ d).tocsr()
    mat.eliminate_zeros()
    return TowerOperator(spec=op.spec, matrix=mat, cells=op.cells,
                         index=op.index, tail_mode=op.tail_mode, hole=hole)


def leading_eigenvalue(op: TowerOperator, tol: float = 1e-13) -> float:
    """Leading eigenvalue of the (possibly masked) tower operator."""
    return spectral_radius(op.matrix, tol=tol)


def eigenvalue_brackets(spec: TowerSpec, hole: TowerHole | None = None) -> tuple:
    """(absorbing, reflecting) leading eigenvalues; the truth lies between."""
    vals = []
    for mode in ("absorb", "reflect"):
        op = build(spec, tail_mode=mode)
        if hole is not None:
            op = open_hole(op, hole)
        vals.append(leading_eigenvalue(op))
    return tuple(vals)


def agreement_depth(h1: TowerHole, h2: TowerHole) -> float:
    """Minimal tower level in the symmetric difference of the two holes:
    the first time a base point can tell them apart.  +inf when equal."""
    diff = h1.cells ^ h2.cells
    if not diff:
        return float("inf")
    return float(min(l for (l, _) in diff))


@dataclass
class ClosenessRow:
    pair_id: int
    depth: float
    r1: float
    r2: float
    abs_diff: float
    error: str = ""


@dataclass
class ClosenessReport:
    rows: list
    slope: float
    intercept: float
    r_squared: float


def eigenvalue_closeness_experiment(spec: TowerSpec, hole_pairs,
                                    tail_mode: str = "absorb") -> ClosenessReport:
    """Tabulate |r1 - r2| against agreement depth and fit an exponential.

    hole_pairs is a list of (TowerHole, TowerHole); pairs whose eigensolve
    fails are reported with an error marker and excluded from the fit.
    """
    base_op = build(spec, tail_mode=tail_mode)
    rows = []
    for pid, (h1, h2) in enumerate(hole_pairs):
        depth = agreement_depth(h1, h2)
        try:
            r1 = leading_eigenvalue(open_hole(base_op, h1))
            r2 = leading_eigenvalue(open_hole(base_op, h2))
            rows.append(ClosenessRow(pid, depth, r1, r2, abs(r1 - r2)))
        except (ConvergenceError, BaseRemovedError) as err:
            rows.append(ClosenessRow(pid, depth, float("nan"), float("nan"),
                                     float("nan"), error=str(err)))
    good = [r for r in rows
            if np.isfinite(r.depth) and np.isfinite(r.abs_diff) and r.abs_diff > 0]
    if len(good) >= 2:
        x = np.array([r.depth for r in good])
        y = np.log([r.abs_diff for r in good])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    else:
        slope, intercept, r2 = float("nan"), float("nan"), float("nan")
    return ClosenessReport(rows=rows, slope=float(slope),
                           intercept=float(intercept), r_squared=float(r2))


def geometric_spec(n_branches: int = 14, theta: float = 0.5, L: int = 16) -> TowerSpec:
    """Geometric-tail fixture: branch widths proportional to theta^R."""
    rs = np.arange(1, n_branches + 1)
    ws = theta ** rs
    ws = ws / ws.sum()
    branches = tuple((float(w), int(r)) for w, r in zip(ws, rs))
    return TowerSpec(branches=branches, C=1.5, theta=theta, L=L)
