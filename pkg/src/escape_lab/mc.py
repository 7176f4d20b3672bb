"""Monte Carlo escape-rate estimation from survivor decay.

Point clouds sampled from Lebesgue measure are iterated and removed the
moment they land in the hole (step 0 included).  Plain mode tracks raw
survivor counts; replenished mode resamples the population back to size N
after every step and records per-step survival rates, whose running product
estimates the surviving measure at deep horizons without starving the fit.

Randomness is counter-based: every draw comes from a Philox stream keyed by
(master seed, stream tag), so runs are reproducible regardless of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynsys import Map, apply_many
from .holes import Hole, contains_many

CHUNK = 1 << 16
JITTER = 2.0 ** -30


class ImmediateExtinctionError(RuntimeError):
    """The hole removed the entire initial population at step 0."""


class HorizonTooDeepError(RuntimeError):
    """Not enough surviving data to fit an escape rate."""


@dataclass
class SurvivorSeries:
    n_max: int
    counts: np.ndarray           # survivors after n steps, n = 0..n_max
    per_step_rate: np.ndarray    # survivors(n)/population before step n
    seed: int
    N: int
    mode: str
    reliable_cap: int = 10**9    # last step before float resolution runs out

    def cum_log_measure(self) -> np.ndarray:
        """log of the estimated surviving measure after each step."""
        with np.errstate(divide="ignore"):
            return np.cumsum(np.log(self.per_step_rate))


@dataclass
class EscapeEstimate:
    rho_hat: float
    rho_lower_hat: float
    rho_upper_hat: float
    stderr: float
    window: tuple = (0, 0)
    extinct_at: int | None = None


def _stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF,
                                                     (tag << 32) | index]))


def _sample_uniform(seed: int, n: int) -> np.ndarray:
    """Initial cloud, drawn in fixed-size chunks with per-chunk streams."""
    chunks = []
    for c in range((n + CHUNK - 1) // CHUNK):
        size = min(CHUNK, n - c * CHUNK)
        chunks.append(_stream(seed, 1, c).random((size, 2)))
    return np.vstack(chunks)


def run_series(m: Map, hole: Hole, N: int, n_max: int, seed: int,
               mode: str = "replenished") -> SurvivorSeries:
    """Iterate a Lebesgue cloud and record survivor statistics.

    Points exactly on the hole boundary count as survivors (the hole is
    open).  Raises ImmediateExtinctionError when nothing survives step 0.
    """
    if N < 1_000:
        raise ValueError("population must be at least 10^3")
    if n_max < 10:
        raise ValueError("horizon must be at least 10")
    if mode not in ("plain", "replenished"):
        raise ValueError(f"unknown mode {mode!r}")
    pts = _sample_uniform(seed, N)
    counts = np.zeros(n_max + 1, dtype=np.int64)
    rates = np.zeros(n_max + 1, dtype=float)

    alive = ~contains_many(hole, pts)
    survivors = int(alive.sum())
    if survivors == 0:
        raise ImmediateExtinctionError("hole removed the whole population at step 0")
    counts[0] = survivors
    rates[0] = survivors / N
    pts = pts[alive]

    for n in range(1, n_max + 1):
        if len(pts) == 0:
            counts[n:] = 0
            rates[n:] = 0.0
            break
        if mode == "replenished" and len(pts) < N:
            gen = _stream(seed, 2, n)
            idx = gen.integers(0, len(pts), size=N)
            pts = pts[idx]
            # regularized resampling: refresh the unresolved low-order bits.
            # For a Lebesgue initial cloud the digits below the resolved
            # scale are still conditionally uniform, so this re-draws them
            # rather than perturbing the law; it also keeps duplicated
            # particles from sharing one deterministic orbit forever.
            pts = (pts + gen.random((N, 2)) * JITTER) % 1.0
        pts = apply_many(m, pts)
        alive = ~contains_many(hole, pts)
        pop = len(pts)
        pts = pts[alive]
        rates[n] = len(pts) / pop
        counts[n] = len(pts) if mode == "plain" else int(round(rates[n] * N))
    cap = n_max
    if mode == "plain" and hasattr(m, "k"):
        # baker iteration is a pure bit shift; float64 holds ~52 bits
        cap = int(48 / np.log2(m.k))
    return SurvivorSeries(n_max=n_max, counts=counts, per_step_rate=rates,
                          seed=seed, N=N, mode=mode, reliable_cap=cap)


def select_window(series: SurvivorSeries, transient: int = 10,
                  min_count: int = 100) -> tuple[int, int]:
    """Fit window: drop the transient, stop when plain-mode counts starve."""
    n0 = transient
    n1 = min(series.n_max, series.reliable_cap)
    if series.mode == "plain":
        ok = np.flatnonzero(series.counts >= min_count)
        n1 = min(n1, int(ok[-1]) if len(ok) else 0)
    else:
        ok = np.flatnonzero(series.per_step_rate > 0.0)
        n1 = min(n1, int(ok[-1]) if len(ok) else 0)
    return n0, n1


def estimate(series: SurvivorSeries, window: tuple | None = None,
             subwindow: int = 10, bootstrap: int = 200) -> EscapeEstimate:
    """Escape-rate fit: least-squares slope of log surviving measure vs n.

    Window min/max sub-slopes give empirical liminf/limsup brackets; the
    standard error comes from bootstrapping the per-step log rates.
    """
    explicit = window is not None
    n0, n1 = select_window(series) if window is None else window
    zero = np.flatnonzero(series.per_step_rate == 0.0)
    if len(zero) and (series.mode == "replenished" or zero[0] <= n1):
        # the sampled measure hit exactly zero; in replenished mode a whole
        # population dying in one step certifies finite-time extinction
        return EscapeEstimate(float("-inf"), float("-inf"), float("-inf"),
                              0.0, (n0, n1), int(zero[0]))
    min_steps = 2 if explicit else 20
    if n1 - n0 + 1 < min_steps:
        raise HorizonTooDeepError(
            f"only {max(0, n1 - n0 + 1)} usable steps in window ({n0}, {n1})")

    logm = series.cum_log_measure()
    ns = np.arange(n0, n1 + 1)
    y = logm[n0:n1 + 1]
    slope = _lsq_slope(ns, y)
    subs = []
    for a in range(n0, n1 - subwindow + 2):
        b = a + subwindow - 1
        subs.append(_lsq_slope(np.arange(a, b + 1), logm[a:b + 1]))
    subs = np.asarray(subs) if subs else np.array([slope])

    log_rates = np.log(series.per_step_rate[n0 + 1:n1 + 1])
    boots = np.empty(bootstrap)
    for b in range(bootstrap):
        rs = _stream(series.seed, 3, b).integers(0, len(log_rates), size=len(log_rates))
        boots[b] = log_rates[rs].mean()
    stderr = float(boots.std(ddof=1))

    rho = min(float(slope), 0.0)
    lo = min(float(subs.min()), rho)
    hi = max(float(subs.max()), rho)
    return EscapeEstimate(rho, lo, hi, stderr, (n0, n1), None)


def _lsq_slope(x: np.ndarray, y: np.ndarray) -> float:
    xm = x - x.mean()
    return float((xm @ (y - y.mean())) / (xm @ xm))


def run_and_estimate(m: Map, hole: Hole, N: int, n_max: int, seed: int,
                     mode: str | None = None) -> tuple[SurvivorSeries, EscapeEstimate]:
    if mode is None:
        mode = "replenished" if n_max > 50 else "plain"
    series = run_series(m, hole, N, n_max, seed, mode)
    return series, estimate(series)


def series_to_rows(series: SurvivorSeries):
    """Rows (n, survivors, rate, cum_log_measure) for CSV output."""
    clm = series.cum_log_measure()
    for n in range(series.n_max + 1):
        yield n, int(series.counts[n]), float(series.per_step_rate[n]), float(clm[n])
