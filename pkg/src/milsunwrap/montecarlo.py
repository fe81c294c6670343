"""Monte Carlo evaluation: acceptance rate and conditional failure rate.

Every trial owns an independent random stream keyed by ``(seed, trial
index)``, so results do not depend on chunking or thread count. The same
stream is reused at every SNR (common random numbers): scatterer positions
and unit-variance noise draws are shared, only the noise scale changes.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from milsunwrap.model import (
    ScattererCoords,
    SystemConfig,
    build_covariance,
    build_design_matrices,
    coherence_and_variance,
    snr_db_to_linear,
    wrap_phase,
)
from milsunwrap.solver import MilsSolution, NoAdmissibleSolution, integer_bounds, solver_for

DEFAULT_TRIALS = 100_000
DEFAULT_THRESHOLDS = np.linspace(0.0, 1.0, 201)
MIN_ACCR = 0.10
_CHUNK = 2048


def phase_variance_db(snr_db: float) -> float:
    """Interferometric phase variance at an SNR in dB; ``inf`` gives 0."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return coherence_and_variance(snr_db_to_linear(snr_db)).phase_variance


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(index),))))


def _draw(rng: np.random.Generator, config: SystemConfig):
    h = config.half_box
    xi = rng.uniform(-h, h, size=2)
    eps = rng.standard_normal(config.n_channels)
    return xi, eps


def _forward(config: SystemConfig, xi, eps, sigma_phi_sq: float):
    """Wrapped phases and true integers for positions ``xi`` (T, 2) and unit noise ``eps`` (T, m)."""
    _, B = build_design_matrices(config)
    L = np.linalg.cholesky(build_covariance(config, 1.0))
    phi = xi @ B.T + math.sqrt(sigma_phi_sq) * (eps @ L.T)
    y = wrap_phase(phi)
    a = np.rint((y - phi) / (2 * np.pi)).astype(int)
    return np.atleast_2d(y), np.atleast_2d(a)


@dataclass(frozen=True)
class TrialRecord:
    true_xi: np.ndarray
    true_a: np.ndarray
    solution: MilsSolution | None
    correct: bool

    @property
    def ap(self) -> float:
        return self.solution.ap if self.solution is not None else math.nan


def simulate_trial(rng: np.random.Generator, config: SystemConfig, snr_db: float) -> TrialRecord:
    """Draw one scatterer uniformly in the box, add correlated noise, wrap and solve.

    ``snr_db = inf`` gives the noise-free case.
    """
    s2 = phase_variance_db(snr_db)
    xi, eps = _draw(rng, config)
    y, a = _forward(config, xi[None], eps[None], s2)
    solver = solver_for(config, tuple(integer_bounds(config, math.sqrt(s2))))
    scale = 1.0 / s2 if s2 > 0 else math.inf
    try:
        sol = solver.solve(y[0], scale, keep_candidates=False)
    except NoAdmissibleSolution:
        return TrialRecord(xi, a[0], None, False)
    return TrialRecord(xi, a[0], sol, bool(np.array_equal(sol.a_hat, a[0])))


@dataclass(frozen=True)
class TrialPool:
    """Column-wise results of many trials at one SNR.

    ``ap`` is NaN and ``admissible`` False where no candidate survived the box
    test; those trials count as rejected and as incorrect.
    """

    snr_db: float
    sigma_phi_sq: float
    true_xi: np.ndarray
    true_a: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    cost_min: np.ndarray
    ap: np.ndarray
    admissible: np.ndarray
    correct: np.ndarray

    @property
    def n_trials(self) -> int:
        return self.ap.shape[0]

    @property
    def failure_rate(self) -> float:
        return 1.0 - float(self.correct.mean())

    def record(self, i: int) -> TrialRecord:
        sol = None
        if self.admissible[i]:
            sol = MilsSolution(
                self.a_hat[i], ScattererCoords(self.b_hat[i, 0], math.nan, self.b_hat[i, 1]),
                float(self.cost_min[i]), float(self.ap[i]), -1,
            )
        return TrialRecord(self.true_xi[i], self.true_a[i], sol, bool(self.correct[i]))

    def rates(self, thresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(accr, cofar, n_accepted)`` per threshold; CoFaR is NaN with nothing accepted."""
        thr = np.asarray(thresholds, dtype=float)
        ok = self.admissible
        order = np.argsort(self.ap[ok], kind="stable")
        ap_sorted = self.ap[ok][order]
        wrong_sorted = (~self.correct[ok])[order]
        # wrong count among entries at or above each sorted position
        wrong_tail = np.concatenate([np.cumsum(wrong_sorted[::-1])[::-1], [0]])
        start = np.searchsorted(ap_sorted, thr, side="left")
        n_acc = ap_sorted.size - start
        n_wrong = wrong_tail[start]
        accr = n_acc / self.n_trials
        with np.errstate(invalid="ignore", divide="ignore"):
            cofar = np.where(n_acc > 0, n_wrong / np.maximum(n_acc, 1), np.nan)
        return accr, cofar, n_acc

    def rmse_correct(self) -> float:
        c = self.correct
        return float(np.sqrt(np.mean(np.sum((self.b_hat[c] - self.true_xi[c]) ** 2, axis=1))))


def _solve_chunks(solver, Y, scale, threads):
    T = Y.shape[0]
    bounds = [(i, min(i + _CHUNK, T)) for i in range(0, T, _CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        parts = [solver.solve_many(Y[i:j], scale) for i, j in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda ij: solver.solve_many(Y[ij[0]:ij[1]], scale), bounds))
    return [np.concatenate(x) for x in zip(*parts)]


def draw_unit_trials(config: SystemConfig, n_trials: int, seed: int):
    """Positions (T, 2) and unit-variance noise draws (T, m) for trials ``0..n_trials-1``."""
    xi = np.empty((n_trials, 2))
    eps = np.empty((n_trials, config.n_channels))
    for i in range(n_trials):
        xi[i], eps[i] = _draw(trial_rng(seed, i), config)
    return xi, eps


def simulate_pool(
    config: SystemConfig,
    snr_db: float,
    n_trials: int,
    seed: int,
    threads: int = 1,
    draws=None,
) -> TrialPool:
    """Run ``n_trials`` independent trials at one SNR.

    ``draws`` may carry precomputed ``(xi, eps)`` from :func:`draw_unit_trials`
    to share them across SNRs.
    """
    xi, eps = draws if draws is not None else draw_unit_trials(config, n_trials, seed)
    s2 = phase_variance_db(snr_db)
    y, a = _forward(config, xi, eps, s2)
    solver = solver_for(config, tuple(integer_bounds(config, math.sqrt(s2))))
    scale = 1.0 / s2 if s2 > 0 else math.inf
    idx, cost, ap, _, b = _solve_chunks(solver, y, scale, threads)
    ok = idx >= 0
    a_hat = np.zeros_like(a)
    a_hat[ok] = solver.grid[idx[ok]]
    correct = ok & np.all(a_hat == a, axis=1)
    return TrialPool(snr_db, s2, xi, a, a_hat, b, cost, ap, ok, correct)


def check_trial_count(n_trials: int) -> None:
    if n_trials < 1000:
        raise ValueError("at least 1000 trials are required")
    if n_trials < 10_000:
        warnings.warn(f"{n_trials} trials: rate estimates will be coarse", stacklevel=3)


@dataclass(frozen=True)
class PerformanceGrid:
    snr_axis: np.ndarray
    threshold_axis: np.ndarray
    accr: np.ndarray  # (n_snr, n_thr)
    cofar: np.ndarray
    discarded: np.ndarray
    n_trials: int

    def rows(self):
        for i, snr in enumerate(self.snr_axis):
            for j, thr in enumerate(self.threshold_axis):
                yield snr, thr, self.accr[i, j], self.cofar[i, j], self.discarded[i, j]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snr_db", "ap_thr", "accr", "cofar", "n_trials", "discarded"])
            for snr, thr, accr, cofar, disc in self.rows():
                w.writerow([_fmt(snr, 4), _prob(thr), _prob(accr), _prob(cofar), self.n_trials, int(disc)])


def performance_grid(
    config: SystemConfig,
    snr_list: Sequence[float],
    threshold_list: Sequence[float] | None = None,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    threads: int = 1,
) -> PerformanceGrid:
    """AccR and CoFaR over an (SNR, threshold) grid.

    Each SNR row comes from one shared pool of trials, so AccR is exactly
    non-increasing along the threshold axis. Cells with AccR below 10 % are
    flagged as discarded.
    """
    thr = np.asarray(DEFAULT_THRESHOLDS if threshold_list is None else threshold_list, dtype=float)
    snr = np.asarray(snr_list, dtype=float)
    if snr.size == 0 or thr.size == 0:
        raise ValueError("SNR and threshold axes must be non-empty")
    check_trial_count(n_trials)
    draws = draw_unit_trials(config, n_trials, seed)
    accr = np.empty((snr.size, thr.size))
    cofar = np.empty_like(accr)
    for i, s in enumerate(snr):
        pool = simulate_pool(config, s, n_trials, seed, threads, draws)
        accr[i], cofar[i], _ = pool.rates(thr)
    return PerformanceGrid(snr, thr, accr, cofar, accr < MIN_ACCR, n_trials)


def roc_from_pool(pool: TrialPool) -> list[tuple[float, float]]:
    """(AccR, CoFaR) over the default grid plus every observed AP value, sorted by AccR."""
    ap = pool.ap[pool.admissible]
    thr = np.unique(np.concatenate([DEFAULT_THRESHOLDS, ap]))
    accr, cofar, n_acc = pool.rates(thr)
    keep = n_acc > 0
    pts = sorted(set(zip(accr[keep].tolist(), cofar[keep].tolist())))
    return pts


def roc_curve(config: SystemConfig, snr_db: float, n_trials: int = DEFAULT_TRIALS, seed: int = 0, threads: int = 1):
    check_trial_count(n_trials)
    return roc_from_pool(simulate_pool(config, snr_db, n_trials, seed, threads))


def roc_auc(points) -> float:
    """Area under the best-achievable AccR as a function of allowed CoFaR, on [0, 1].

    ``AccR*(c) = max{AccR_i : CoFaR_i <= c}``; higher is better, and a
    perfect unwrapper (CoFaR 0 at AccR 1) scores 1.
    """
    pts = sorted((c, a) for a, c in points)
    area = 0.0
    best = 0.0
    prev_c = None
    for c, a in pts:
        if prev_c is not None:
            area += best * (c - prev_c)
        best = max(best, a)
        prev_c = c
    if prev_c is not None:
        area += best * (1.0 - prev_c)
    return area


@dataclass(frozen=True)
class Calibration:
    snr_db: float
    target_cofar: float
    ap_thr: float  # NaN when unreachable
    achieved_cofar: float
    achieved_accr: float

    @property
    def reachable(self) -> bool:
        return not math.isnan(self.ap_thr)


def calibrate_from_pool(pool: TrialPool, target_cofar: float) -> Calibration:
    if not 0.0 < target_cofar <= 1.0:
        raise ValueError("target CoFaR must lie in (0, 1]")
    ap = pool.ap[pool.admissible]
    thr = np.unique(np.concatenate([DEFAULT_THRESHOLDS, ap]))
    accr, cofar, _ = pool.rates(thr)
    ok = (accr >= MIN_ACCR) & (cofar <= target_cofar)
    if not ok.any():
        return Calibration(pool.snr_db, target_cofar, math.nan, math.nan, math.nan)
    j = int(np.flatnonzero(ok)[0])
    return Calibration(pool.snr_db, target_cofar, float(thr[j]), float(cofar[j]), float(accr[j]))


def calibrate_threshold(
    config: SystemConfig,
    snr_db: float,
    target_cofar: float,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    threads: int = 1,
) -> Calibration:
    """Smallest AP threshold whose empirical CoFaR meets the target with AccR >= 10 %.

    Check ``.reachable`` on the result: when no threshold qualifies the
    threshold is NaN rather than a fallback value.
    """
    check_trial_count(n_trials)
    return calibrate_from_pool(simulate_pool(config, snr_db, n_trials, seed, threads), target_cofar)


@dataclass(frozen=True)
class ThresholdTable:
    """Fixed-CoFaR thresholds tabulated in SNR.

    Lookup is piecewise-linear in dB between reachable entries and clamped at
    the ends. At or below the highest unreachable SNR the lookup returns
    ``inf``: nothing is accepted there.
    """

    target_cofar: float
    entries: tuple[Calibration, ...]

    def lookup(self, snr_db: float) -> float:
        dead = [e.snr_db for e in self.entries if not e.reachable]
        if dead and snr_db <= max(dead):
            return math.inf
        live = sorted((e.snr_db, e.ap_thr) for e in self.entries if e.reachable)
        if not live:
            return math.inf
        xs, ys = zip(*live)
        return float(np.interp(snr_db, xs, ys))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snr_db", "ap_thr", "achieved_cofar", "achieved_accr", "target_cofar"])
            for e in self.entries:
                w.writerow([_fmt(e.snr_db, 4), _prob(e.ap_thr), _prob(e.achieved_cofar),
                            _prob(e.achieved_accr), _prob(e.target_cofar)])

    @classmethod
    def from_csv(cls, path) -> "ThresholdTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = tuple(
            Calibration(float(r["snr_db"]), float(r["target_cofar"]), float(r["ap_thr"]),
                        float(r["achieved_cofar"]), float(r["achieved_accr"]))
            for r in rows
        )
        return cls(entries[0].target_cofar if entries else math.nan, entries)


def threshold_table(
    config: SystemConfig,
    snr_list: Sequence[float],
    target_cofar: float,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    threads: int = 1,
) -> ThresholdTable:
    check_trial_count(n_trials)
    draws = draw_unit_trials(config, n_trials, seed)
    entries = tuple(
        calibrate_from_pool(simulate_pool(config, s, n_trials, seed, threads, draws), target_cofar)
        for s in snr_list
    )
    return ThresholdTable(target_cofar, entries)


def write_roc_csv(curves: dict[float, list[tuple[float, float]]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_db", "accr", "cofar"])
        for snr, pts in curves.items():
            for a, c in pts:
                w.writerow([_fmt(snr, 4), _prob(a), _prob(c)])


def _fmt(x: float, digits: int) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def _prob(x: float) -> str:
    return _fmt(float(x), 6)
