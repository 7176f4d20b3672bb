"""Power iteration for leading eigenpairs of nonnegative operators."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class ConvergenceError(RuntimeError):
    """Power iteration failed to stabilize; carries the last iterate."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    gap_proxy: float
    converged: bool


def power_iteration(matvec, n: int, start: np.ndarray | None = None,
                    tol: float = 1e-12, residual_tol: float = 1e-10,
                    maxit: int = 100_000, stable_iters: int = 10) -> PowerResult:
    """L1-normalized power iteration for a nonnegative linear action.

    Converged when the eigenvalue estimate varies by < tol over stable_iters
    consecutive iterations and the L1 residual of the reported pair is below
    residual_tol.  Raises ConvergenceError at maxit with the last iterate
    attached (a sign of near-degenerate leading eigenvalues).
    """
    v = np.full(n, 1.0 / n) if start is None else start / start.sum()
    history: deque = deque(maxlen=stable_iters)
    deltas: deque = deque(maxlen=6)
    prev_v = v
    est = 0.0
    for it in range(1, maxit + 1):
        w = matvec(v)
        nrm = float(w.sum())
        if nrm <= 0.0:
            # mass annihilated: leading eigenvalue 0 (finite-time extinction)
            return PowerResult(0.0, v, it, 0.0, 0.0, True)
        est = nrm  # v had unit L1 mass
        residual = float(np.abs(w - est * v).sum())
        w = w / nrm
        deltas.append(float(np.abs(w - prev_v).sum()))
        prev_v = v
        v = w
        history.append(est)
        if (len(history) == stable_iters
                and max(history) - min(history) < tol
                and residual < residual_tol):
            gap = _gap_from_deltas(deltas)
            final_res = float(np.abs(matvec(v) - est * v).sum())
            return PowerResult(est, v, it, final_res, gap, True)
    partial = PowerResult(est, v, maxit, float("nan"), _gap_from_deltas(deltas), False)
    raise ConvergenceError(
        f"power iteration did not converge in {maxit} iterations", partial)


def _gap_from_deltas(deltas) -> float:
    ratios = [b / a for a, b in zip(list(deltas)[:-1], list(deltas)[1:]) if a > 0]
    if not ratios:
        return 0.0
    g = float(np.exp(np.mean(np.log(np.clip(ratios, 1e-300, None)))))
    return min(g, 1.0)


def spectral_radius(w, tol: float = 1e-12, maxit: int = 100_000) -> float:
    """Perron root of a nonnegative matrix.

    Reducible matrices are condensed into strongly connected components and
    the maximum per-component root is returned; a diagonal shift makes each
    irreducible block primitive so plain power iteration converges.
    """
    w = sp.csr_matrix(w, dtype=float)
    n = w.shape[0]
    if n == 0 or w.nnz == 0:
        return 0.0
    ncomp, labels = connected_components(w, directed=True, connection="strong")
    best = 0.0
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        sub = w[idx][:, idx]
        if len(idx) == 1 and sub[0, 0] == 0.0:
            continue  # transient singleton, no cycle
        if sub.nnz == 0:
            continue
        shift = float(sub.max())
        shifted = (sub + shift * sp.identity(len(idx), format="csr")).T.tocsr()
        res = power_iteration(lambda v, m=shifted: m @ v, len(idx),
                              tol=tol, residual_tol=np.inf, maxit=maxit)
        best = max(best, res.value - shift)
    return best
