"""Closed reference systems: hyperbolic toral automorphisms and the baker map.

Both preserve Lebesgue measure on the unit square / 2-torus.  Toral maps are
given by 2x2 integer matrices with unit determinant and |trace| > 2, so all
eigen-data has a closed form and every downstream oracle can be exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np


class Point2(NamedTuple):
    """A point on the torus, coordinates reduced mod 1 into [0, 1)."""

    x: float
    y: float


def _mod1(v):
    return v - np.floor(v)


class NotHyperbolicError(ValueError):
    """Matrix fails the |det| = 1 or |trace| > 2 gate."""


@dataclass(frozen=True)
class TorusMap:
    """Linear toral automorphism with precomputed eigen-structure.

    lambda_u is the (signed) expanding eigenvalue; orientation records its
    sign, which controls whether the map preserves or reverses orientation
    along the unstable direction.
    """

    matrix: np.ndarray
    lambda_u: float = field(init=False)
    lambda_s: float = field(init=False)
    e_u: np.ndarray = field(init=False)
    e_s: np.ndarray = field(init=False)
    orientation: str = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (2, 2) or not np.all(m == np.round(m)):
            raise NotHyperbolicError("matrix must be a 2x2 integer matrix")
        m = m.astype(np.int64)
        det = int(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        tr = int(m[0, 0] + m[1, 1])
        if abs(det) != 1:
            raise NotHyperbolicError(f"|det| must be 1, got {det}")
        if abs(tr) <= 2:
            raise NotHyperbolicError(f"|trace| must exceed 2, got {tr}")
        disc = tr * tr - 4 * det
        root = np.sqrt(float(disc))
        r1 = 0.5 * (tr + root)
        r2 = 0.5 * (tr - root)
        lam_u = r1 if abs(r1) >= abs(r2) else r2
        lam_s = det / lam_u  # exact relation lambda_u * lambda_s = det
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "lambda_u", float(lam_u))
        object.__setattr__(self, "lambda_s", float(lam_s))
        object.__setattr__(self, "e_u", _eigvec(m, lam_u))
        object.__setattr__(self, "e_s", _eigvec(m, lam_s))
        object.__setattr__(self, "orientation",
                           "preserving" if lam_u > 0 else "reversing")

    @property
    def inverse_matrix(self) -> np.ndarray:
        m = self.matrix
        det = int(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        adj = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=np.int64)
        return adj * det  # det is +-1

    def __hash__(self):
        return hash(tuple(self.matrix.ravel().tolist()))

    def __eq__(self, other):
        return isinstance(other, TorusMap) and np.array_equal(self.matrix, other.matrix)


def _eigvec(m: np.ndarray, lam: float) -> np.ndarray:
    a, b = float(m[0, 0]), float(m[0, 1])
    c = float(m[1, 0])
    if abs(b) > 1e-14:
        v = np.array([b, lam - a])
    else:
        v = np.array([lam - float(m[1, 1]), c])
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class BakerMap:
    """(x, y) -> (kx mod 1, (y + floor(kx)) / k) on the unit square."""

    k: int = 2

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("baker map needs branch count k >= 2")

    @property
    def lambda_u(self) -> float:
        return float(self.k)

    def __hash__(self):
        return hash(("baker", self.k))


Map = TorusMap | BakerMap


def apply(m: Map, p) -> Point2:
    """One forward step; accepts Point2 / tuple, returns Point2."""
    x, y = float(p[0]), float(p[1])
    if isinstance(m, TorusMap):
        a = m.matrix
        return Point2(_mod1(a[0, 0] * x + a[0, 1] * y), _mod1(a[1, 0] * x + a[1, 1] * y))
    kx = m.k * x
    branch = int(np.floor(kx)) % m.k
    return Point2(_mod1(kx), (y + branch) / m.k)


def apply_inverse(m: Map, p) -> Point2:
    """One backward step (both map families are invertible)."""
    x, y = float(p[0]), float(p[1])
    if isinstance(m, TorusMap):
        a = m.inverse_matrix
        return Point2(_mod1(a[0, 0] * x + a[0, 1] * y), _mod1(a[1, 0] * x + a[1, 1] * y))
    ky = m.k * y
    branch = int(np.floor(ky)) % m.k
    return Point2((x + branch) / m.k, _mod1(ky))


def apply_many(m: Map, pts: np.ndarray) -> np.ndarray:
    """Vectorized forward step on an (n, 2) array of torus points."""
    if isinstance(m, TorusMap):
        out = pts @ m.matrix.T.astype(float)
        return _mod1(out)
    kx = m.k * pts[:, 0]
    branch = np.floor(kx)
    return np.column_stack([_mod1(kx), (pts[:, 1] + branch) / m.k])


def apply_exact(m: BakerMap, p: tuple[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
    """Exact rational arithmetic path for the baker map."""
    x, y = p
    kx = m.k * x
    branch = int(kx)  # floor for nonnegative rationals in [0,1)
    return (kx - branch, (y + branch) / m.k)


def log_expansion(m: Map) -> float:
    """log |lambda_u|; equals the integrated positive Lyapunov exponent."""
    if isinstance(m, TorusMap):
        return float(np.log(abs(m.lambda_u)))
    return float(np.log(m.k))


def periodic_points(m: TorusMap, period: int) -> list[Point2]:
    """All solutions of (A^p - I) x = 0 mod 1, via exact integer arithmetic.

    The count equals |det(A^p - I)|; points are rationals with that
    denominator, enumerated by brute force over the candidate lattice.
    """
    if not isinstance(m, TorusMap):
        raise TypeError("periodic_points is defined for toral maps")
    if not 1 <= period <= 12:
        raise ValueError("period must be in [1, 12]")
    ap = np.linalg.matrix_power(m.matrix.astype(object), period)
    b = ap - np.eye(2, dtype=object).astype(object)
    b = np.array([[int(b[0, 0]), int(b[0, 1])], [int(b[1, 0]), int(b[1, 1])]], dtype=object)
    det = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
    n = abs(int(det))
    if n == 0:
        raise ValueError("degenerate period (eigenvalue 1); not hyperbolic")
    # solutions are x = adj(B) k / det for integer k; enumerate k mod det
    adj = [[b[1, 1], -b[0, 1]], [-b[1, 0], b[0, 0]]]
    pts = set()
    for k1 in range(n):
        for k2 in range(n):
            num_x = adj[0][0] * k1 + adj[0][1] * k2
            num_y = adj[1][0] * k1 + adj[1][1] * k2
            x = Fraction(num_x, det) % 1
            y = Fraction(num_y, det) % 1
            pts.add((x, y))
    assert len(pts) == n, "periodic point count must equal |det(A^p - I)|"
    return sorted(Point2(float(x), float(y)) for (x, y) in pts)


def map_from_config(cfg: dict) -> Map:
    """Build a map from {"kind": "toral", "matrix": ...} or {"kind": "baker", "k": ...}."""
    kind = cfg.get("kind")
    if kind == "toral":
        return TorusMap(np.asarray(cfg["matrix"]))
    if kind == "baker":
        return BakerMap(int(cfg["k"]))
    raise ValueError(f"unknown map kind: {kind!r}")


CAT_MATRIX = np.array([[2, 1], [1, 1]])
NEGATED_CAT_MATRIX = np.array([[-2, -1], [-1, -1]])


def cat_map() -> TorusMap:
    return TorusMap(CAT_MATRIX)


def negated_cat_map() -> TorusMap:
    return TorusMap(NEGATED_CAT_MATRIX)
