"""Hole-family sweeps: escape rate as a function of the parameter, plus
staircase, Hölder, and semicontinuity analysis of the resulting curve.

Monte Carlo runs share one seed across parameters (common random numbers)
and the Ulam operator is built once and re-masked per sample; consecutive
samples with identical masks reuse the previous eigenvalue bitwise, so
plateaus of the family are exact plateaus of the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mc, survivor, symbolic, ulam
from .holes import HoleFamily
from .linalg import ConvergenceError


@dataclass
class SweepConfig:
    mc_N: int = 100_000
    mc_n_max: int = 40
    mc_mode: str = "plain"
    seed: int = 2024
    ulam_k: int = 96
    survivor_k: int = 64
    survivor_n: int = 24
    pressure_partition: object = None   # MarkovPartition, optional
    pressure_eps: float = 1e-3
    cell_rule: str = "interior"


@dataclass
class SweepSample:
    t: float
    rho_mc: float = float("nan")
    rho_mc_lo: float = float("nan")
    rho_mc_hi: float = float("nan")
    stderr: float = float("nan")
    rho_ulam: float = float("nan")
    p_upper: float = float("nan")
    p_lower: float = float("nan")
    gap_flag: str = "UNDECIDED"
    gap: float = float("nan")
    error: str = ""


@dataclass
class SweepResult:
    family: HoleFamily
    t_samples: np.ndarray
    samples: list

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    def flags(self) -> list:
        return [s.gap_flag for s in self.samples]


def run(family: HoleFamily, n_samples: int = 100,
        cfg: SweepConfig | None = None) -> SweepResult:
    """Evaluate every estimator across the family."""
    if n_samples < 50:
        raise ValueError("need at least 50 samples across the family")
    cfg = cfg or SweepConfig()
    m = family.map
    if m is None:
        raise ValueError("family must carry its map")
    ts = family.samples(n_samples)
    op = ulam.build(m, cfg.ulam_k)
    samples = []
    prev_mask = None
    prev_spec = None
    for t in ts:
        s = SweepSample(t=float(t))
        try:
            hole = family(t)
            s = _evaluate(s, m, hole, op, cfg, prev_mask, prev_spec)
            if not s.error:
                prev_mask = s._mask
                prev_spec = s._spec
        except Exception as err:  # keep sweeping, mark the sample
            s.error = f"{type(err).__name__}: {err}"
        samples.append(s)
    return SweepResult(family=family, t_samples=ts, samples=samples)


def _evaluate(s, m, hole, op, cfg, prev_mask, prev_spec):
    if hole.is_empty:
        s.rho_mc = s.rho_mc_lo = s.rho_mc_hi = 0.0
        s.stderr = 0.0
        s.rho_ulam = 0.0
        s.gap_flag = "GAP"
        s.gap = float("inf")
        s._mask = frozenset()
        s._spec = None
        return s
    masked_cells = frozenset(ulam.classify_cells(op, hole, cfg.cell_rule).tolist())
    if prev_mask is not None and masked_cells == prev_mask and prev_spec is not None:
        spec = prev_spec
    else:
        mop = ulam.mask(op, hole, cfg.cell_rule)
        try:
            spec = ulam.leading(mop)
        except ConvergenceError as err:
            spec = err.partial
            s.error = "ulam: " + str(err)
    s.rho_ulam = ulam.escape_rate(spec)
    s._mask = masked_cells
    s._spec = spec

    try:
        series = mc.run_series(m, hole, cfg.mc_N, cfg.mc_n_max, cfg.seed,
                               cfg.mc_mode)
        est = mc.estimate(series)
        s.rho_mc = est.rho_hat
        s.rho_mc_lo = est.rho_lower_hat
        s.rho_mc_hi = est.rho_upper_hat
        s.stderr = est.stderr
    except mc.ImmediateExtinctionError:
        s.rho_mc = s.rho_mc_lo = s.rho_mc_hi = float("-inf")
        s.stderr = 0.0
    except mc.HorizonTooDeepError as err:
        s.error = (s.error + "; " if s.error else "") + "mc: " + str(err)

    ap = survivor.compute(m, hole, cfg.survivor_k, cfg.survivor_n)
    s.gap = survivor.boundary_gap(ap, hole)
    cell_w = 1.0 / cfg.survivor_k
    if s.gap < cell_w:
        s.gap_flag = "TOUCH"
    elif ap.stabilized or survivor._history_settled(ap.counts_history):
        s.gap_flag = "GAP"
    else:
        s.gap_flag = "UNDECIDED"

    if cfg.pressure_partition is not None:
        rep = symbolic.pressure_report(cfg.pressure_partition, hole,
                                       cfg.pressure_eps)
        s.p_upper = rep.p_upper
        s.p_lower = rep.p_lower
    return s


@dataclass
class StaircaseReport:
    plateaus: list              # (i0, i1) sample-index ranges, inclusive
    jumps: list                 # (i, left_value, right_value)
    monotone_violations: list
    plateau_fraction: float
    tol_plateau: float
    tol_jump: float
    source: str


def staircase(sr: SweepResult, tol_plateau: float = 1e-3,
              tol_jump: float = 5e-2, source: str = "rho_ulam") -> StaircaseReport:
    """Plateau/jump segmentation of the sweep curve.

    A plateau is a maximal sample range whose total variation stays below
    tol_plateau; a jump is a step between consecutive samples exceeding
    tol_jump (infinities included).
    """
    y = sr.column(source)
    t = sr.t_samples
    n = len(y)
    plateaus = []
    i = 0
    while i < n:
        j = i
        tv = 0.0
        while j + 1 < n:
            step = _step_size(y[j], y[j + 1])
            if tv + step >= tol_plateau:
                break
            tv += step
            j += 1
        if j > i:
            plateaus.append((i, j))
        i = j + 1
    jumps = []
    for i in range(n - 1):
        if _step_size(y[i], y[i + 1]) > tol_jump:
            jumps.append((i, float(y[i]), float(y[i + 1])))
    violations = []
    if sr.family.monotone == "increasing":
        stderr = sr.column("stderr")
        for i in range(n - 1):
            tol = 1e-11 if source == "rho_ulam" else 3 * float(
                np.hypot(stderr[i], stderr[i + 1]))
            if y[i + 1] > y[i] + tol:
                violations.append(i)
    length = float(t[-1] - t[0]) if n > 1 else 0.0
    pl_len = sum(float(t[j] - t[i]) for (i, j) in plateaus)
    frac = pl_len / length if length > 0 else 0.0
    return StaircaseReport(plateaus=plateaus, jumps=jumps,
                           monotone_violations=violations,
                           plateau_fraction=frac, tol_plateau=tol_plateau,
                           tol_jump=tol_jump, source=source)


def _step_size(a: float, b: float) -> float:
    if a == b:
        return 0.0  # covers matching infinities
    if not (np.isfinite(a) and np.isfinite(b)):
        return float("inf")
    return abs(b - a)


@dataclass
class HolderFit:
    C: float
    alpha: float
    r_squared: float
    n_pairs: int
    plateau: bool


def holder_fit(sr: SweepResult, t_range: tuple | None = None,
               source: str = "rho_ulam") -> HolderFit:
    """Fit |rho(t) - rho(t0)| <= C |t - t0|^alpha by log-log regression.

    Pairs are anchored at the left edge of the window (the small-hole
    endpoint), where the Hölder singularity lives; interior pairs of a
    smooth curve would only ever report the Lipschitz exponent 1.
    """
    y = sr.column(source)
    t = sr.t_samples
    if t_range is not None:
        sel = (t >= t_range[0]) & (t <= t_range[1])
        y, t = y[sel], t[sel]
    good = np.isfinite(y)
    y, t = y[good], t[good]
    n = len(y)
    xs, ys = [], []
    if n >= 2:
        y0, t0 = y[0], t[0]
        for j in range(1, n):
            dy = abs(y[j] - y0)
            dt = abs(t[j] - t0)
            if dy > 0 and dt > 0:
                xs.append(np.log(dt))
                ys.append(np.log(dy))
    if n < 2 or len(xs) < max(4, 0.2 * (n - 1)):
        return HolderFit(C=float("nan"), alpha=float("nan"),
                         r_squared=float("nan"), n_pairs=len(xs), plateau=True)
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
    return HolderFit(C=float(np.exp(intercept)), alpha=float(slope),
                     r_squared=float(r2), n_pairs=len(xs), plateau=False)


@dataclass
class SemicontinuityReport:
    t0: float
    value: float
    left_limit: float
    right_limit: float
    classification: str  # continuous | lsc-violating | usc-violating | undecided
    tolerance: float


def semicontinuity(sr: SweepResult, t0: float, source: str = "rho_ulam",
                   width: int = 3) -> SemicontinuityReport:
    """One-sided limits around t0 and the matching classification.

    A drop below the value at t0 on either side violates lower
    semicontinuity; a rise violates upper semicontinuity.
    """
    y = sr.column(source)
    t = sr.t_samples
    i0 = int(np.argmin(np.abs(t - t0)))
    if not 0 < i0 < len(t) - 1:
        raise ValueError("t0 must be an interior sample")
    left = y[max(0, i0 - width):i0]
    right = y[i0 + 1:i0 + 1 + width]
    lval = float(np.median(left)) if len(left) else float("nan")
    rval = float(np.median(right)) if len(right) else float("nan")
    val = float(y[i0])
    stderr = sr.column("stderr")
    tol = 1e-9 if source == "rho_ulam" else float(3 * np.nanmax(stderr) + 1e-12)
    low_viol = _below(min(lval, rval), val, tol)
    high_viol = _above(max(lval, rval), val, tol)
    if low_viol and not high_viol:
        cls = "lsc-violating"
    elif high_viol and not low_viol:
        cls = "usc-violating"
    elif not low_viol and not high_viol:
        cls = "continuous"
    else:
        cls = "undecided"
    return SemicontinuityReport(t0=float(t[i0]), value=val, left_limit=lval,
                                right_limit=rval, classification=cls,
                                tolerance=tol)


def _below(a: float, b: float, tol: float) -> bool:
    if a == b:
        return False
    if a == float("-inf"):
        return True
    if b == float("-inf"):
        return False
    return a < b - tol


def _above(a: float, b: float, tol: float) -> bool:
    if a == b:
        return False
    if a == float("inf"):
        return True
    if b == float("-inf") and np.isfinite(a):
        return True
    return np.isfinite(a) and np.isfinite(b) and a > b + tol


def sweep_rows(sr: SweepResult):
    """CSV rows: t, rho_mc, rho_mc_lo, rho_mc_hi, stderr, rho_ulam,
    p_upper, p_lower, gap_flag."""
    for s in sr.samples:
        yield (s.t, s.rho_mc, s.rho_mc_lo, s.rho_mc_hi, s.stderr,
               s.rho_ulam, s.p_upper, s.p_lower, s.gap_flag)
