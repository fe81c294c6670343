"""End-to-end point-cloud reconstruction: target, synthetic phases, three processing modes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from milsunwrap.model import SystemConfig, build_covariance, build_design_matrices, wrap_phase
from milsunwrap.montecarlo import (
    DEFAULT_TRIALS,
    ThresholdTable,
    phase_variance_db,
    threshold_table,
    trial_rng,
)
from milsunwrap.solver import MilsProblem, integer_bounds, solver_for


class Mode(str, Enum):
    NO_UNWRAP = "no_unwrap"
    BEFORE_AR = "before_ar"
    AFTER_AR = "after_ar"


@dataclass(frozen=True)
class TargetScene:
    """Point scatterers ``(xi1, xi2, xi3)`` in metres with a per-point SNR in dB."""

    points: np.ndarray  # (N, 3)
    snr_db: np.ndarray  # (N,)
    dims: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    label: str = ""

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        snr = np.broadcast_to(np.asarray(self.snr_db, dtype=float), (pts.shape[0],)).copy()
        if pts.shape[1] != 3:
            raise ValueError("points must have three coordinates")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "snr_db", snr)

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi1_m", "xi2_m", "xi3_m", "snr_db"])
            for (x1, x2, x3), s in zip(self.points, self.snr_db):
                w.writerow([f"{x1:.4f}", f"{x2:.4f}", f"{x3:.4f}", f"{s:.4f}"])

    @classmethod
    def from_csv(cls, path, default_snr_db: float | None = None, label: str = "") -> "TargetScene":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no scatterers")
        pts, snr = [], []
        for n, r in enumerate(rows, start=2):
            try:
                pts.append([float(r["xi1_m"]), float(r["xi2_m"]), float(r["xi3_m"])])
                s = r.get("snr_db")
                snr.append(float(s) if s not in (None, "") else float(default_snr_db))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: row {n}: {exc}") from None
        return cls(np.array(pts), np.array(snr), label=label or Path(path).stem)


def generate_ship_target(
    seed: int = 0,
    n_points: int = 312,
    dims: tuple[float, float, float] = (60.0, 10.0, 15.0),
    snr_db: float = 25.0,
) -> TargetScene:
    """Procedural ship: tapered hull, deckhouse block and a mast.

    Length runs along xi1 (cross-range), beam along xi2 (down-range) and
    height along xi3, all centred on the origin. ``n_points = 1`` gives the
    centre of the hull.
    """
    L, W, H = (float(d) for d in dims)
    if min(L, W, H) <= 0:
        raise ValueError("ship dimensions must be positive")
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    rng = np.random.default_rng(seed)
    z0 = -H / 2
    deck = z0 + 0.35 * H
    if n_points == 1:
        return TargetScene(np.array([[0.0, 0.0, (z0 + deck) / 2]]), snr_db, (L, W, H), "ship")

    n_hull = int(round(0.55 * n_points))
    n_house = int(round(0.30 * n_points))
    n_mast = n_points - n_hull - n_house

    # hull volume, beam tapering to zero over the forward 30 %
    x = rng.uniform(-L / 2, L / 2, n_hull)
    taper = np.clip((L / 2 - x) / (0.3 * L), 0.0, 1.0)
    half_beam = (W / 2) * taper
    side = rng.choice([-1.0, 1.0], n_hull)
    frac = rng.uniform(0.0, 1.0, n_hull)
    y = side * half_beam * np.sqrt(frac)
    z = z0 + (deck - z0) * rng.uniform(0.0, 1.0, n_hull) ** 0.5
    hull = np.column_stack([x, y, z])

    house_top = deck + 0.35 * H
    house = np.column_stack([
        rng.uniform(-0.3 * L, 0.05 * L, n_house),
        rng.uniform(-0.35 * W, 0.35 * W, n_house),
        rng.uniform(deck, house_top, n_house),
    ])

    mast = np.column_stack([
        np.full(n_mast, -0.1 * L),
        np.zeros(n_mast),
        np.linspace(house_top, H / 2, n_mast) if n_mast > 1 else np.full(n_mast, H / 2),
    ])
    return TargetScene(np.vstack([hull, house, mast]), snr_db, (L, W, H), "ship")


@dataclass(frozen=True)
class SyntheticObservations:
    """Wrapped phases for every scatterer of a scene, with the truth kept for scoring."""

    scene: TargetScene
    y: np.ndarray  # (N, m)
    true_a: np.ndarray  # (N, m)
    sigma_phi_sq: np.ndarray  # (N,)

    def problems(self, config: SystemConfig) -> list[MilsProblem]:
        A, B = build_design_matrices(config)
        return [
            MilsProblem(self.y[i], A, B, build_covariance(config, s2), config.half_box)
            for i, s2 in enumerate(self.sigma_phi_sq)
        ]


def synthesize_phases(scene: TargetScene, config: SystemConfig, seed: int, noise: bool = True) -> SyntheticObservations:
    """Forward-model every scatterer, add correlated phase noise at its SNR and wrap.

    Scatterer ``i`` draws its noise from the stream ``(seed, i)``.
    """
    b = scene.points[:, [0, 2]]
    if np.any(np.abs(b) > config.half_box):
        bad = int(np.flatnonzero(np.any(np.abs(b) > config.half_box, axis=1))[0])
        raise ValueError(f"scatterer {bad} lies outside the +/-{config.half_box} m box")
    _, B = build_design_matrices(config)
    L = np.linalg.cholesky(build_covariance(config, 1.0))
    s2 = np.array([phase_variance_db(s) for s in scene.snr_db])
    phi = b @ B.T
    if noise:
        eps = np.array([trial_rng(seed, i).standard_normal(config.n_channels) for i in range(len(scene))])
        phi = phi + np.sqrt(s2)[:, None] * (eps @ L.T)
    y = wrap_phase(phi)
    a = np.rint((y - phi) / (2 * np.pi)).astype(int)
    return SyntheticObservations(scene, np.atleast_2d(y), np.atleast_2d(a), s2)


@dataclass(frozen=True)
class ReconstructionReport:
    mode: Mode
    accepted_pct: float
    correct_pct: float
    rmse_all_m: float
    rmse_correct_m: float
    truth: np.ndarray  # (N, 3)
    estimate: np.ndarray  # (N, 3), NaN where no solution
    ap: np.ndarray
    ap_thr: np.ndarray
    accepted: np.ndarray
    correct: np.ndarray
    true_a: np.ndarray
    a_hat: np.ndarray
    channel_names: list[str] = field(default_factory=list)

    @property
    def n_scatterers(self) -> int:
        return self.truth.shape[0]

    def summary(self) -> dict:
        return {
            "mode": self.mode.value,
            "n_scatterers": self.n_scatterers,
            "accepted_pct": round(self.accepted_pct, 4),
            "correct_pct": round(self.correct_pct, 4),
            "rmse_all_m": round(self.rmse_all_m, 4),
            "rmse_correct_m": round(self.rmse_correct_m, 4),
        }

    def to_json(self, path) -> None:
        doc = self.summary()
        doc["scatterers"] = [
            {
                "truth": [round(v, 4) for v in self.truth[i].tolist()],
                "estimate": [None if math.isnan(v) else round(v, 4) for v in self.estimate[i].tolist()],
                "ap": None if math.isnan(self.ap[i]) else round(float(self.ap[i]), 6),
                "accepted": bool(self.accepted[i]),
                "correct": bool(self.correct[i]),
                "k_true": self.true_a[i].tolist(),
                "k_hat": self.a_hat[i].tolist(),
            }
            for i in range(self.n_scatterers)
        ]
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, allow_nan=False)

    def to_csv(self, path) -> None:
        names = self.channel_names or [f"ch{i}" for i in range(self.true_a.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["index", "xi1_m", "xi2_m", "xi3_m", "xi1_hat_m", "xi2_hat_m", "xi3_hat_m", "ap", "ap_thr",
                 "accepted", "correct"]
                + [f"k_true_{n}" for n in names]
                + [f"k_hat_{n}" for n in names]
            )
            for i in range(self.n_scatterers):
                w.writerow(
                    [i]
                    + [f"{v:.4f}" for v in self.truth[i]]
                    + ["nan" if math.isnan(v) else f"{v:.4f}" for v in self.estimate[i]]
                    + ["nan" if math.isnan(self.ap[i]) else f"{self.ap[i]:.6f}",
                       "nan" if math.isnan(self.ap_thr[i]) else f"{self.ap_thr[i]:.6f}",
                       int(self.accepted[i]), int(self.correct[i])]
                    + self.true_a[i].tolist()
                    + self.a_hat[i].tolist()
                )


def _rmse(err) -> float:
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1)))) if err.shape[0] else math.nan


def reconstruct(
    obs: SyntheticObservations,
    config: SystemConfig,
    mode: Mode | str,
    ap_thr: float | None = None,
    target_cofar: float | None = None,
    thresholds: ThresholdTable | None = None,
    calib_trials: int = DEFAULT_TRIALS,
    calib_seed: int = 0,
    threads: int = 1,
) -> ReconstructionReport:
    """Reconstruct every scatterer and score it against the truth.

    ``no_unwrap`` forces all integers to zero, ``before_ar`` keeps every MILS
    solution, ``after_ar`` keeps only those with AP at or above the
    threshold. The threshold is ``ap_thr`` if given, otherwise looked up per
    scatterer SNR in ``thresholds`` (calibrated here for ``target_cofar`` if
    no table is supplied). Down-range is copied from the truth.
    """
    mode = Mode(mode)
    n = len(obs.scene)
    m = config.n_channels
    truth = obs.scene.points
    est = np.full((n, 3), np.nan)
    est[:, 1] = truth[:, 1]
    ap = np.full(n, np.nan)
    a_hat = np.zeros((n, m), dtype=int)
    solved = np.zeros(n, dtype=bool)

    for s2 in np.unique(obs.sigma_phi_sq):
        rows = np.flatnonzero(obs.sigma_phi_sq == s2)
        solver = solver_for(config, tuple(integer_bounds(config, math.sqrt(s2))))
        Y = obs.y[rows]
        if mode is Mode.NO_UNWRAP:
            b = Y @ solver.G.T
            est[rows, 0], est[rows, 2] = b[:, 0], b[:, 1]
            solved[rows] = True
            continue
        scale = 1.0 / s2 if s2 > 0 else math.inf
        idx, _, ap_rows, _, b = solver.solve_many(Y, scale)
        ok = idx >= 0
        r_ok = rows[ok]
        est[r_ok, 0], est[r_ok, 2] = b[ok, 0], b[ok, 1]
        a_hat[r_ok] = solver.grid[idx[ok]]
        ap[rows] = ap_rows
        solved[r_ok] = True

    thr = np.full(n, np.nan)
    if mode is Mode.AFTER_AR:
        if ap_thr is not None:
            thr[:] = ap_thr
        else:
            if thresholds is None:
                if target_cofar is None:
                    raise ValueError("after_ar needs ap_thr, target_cofar or a threshold table")
                snrs = sorted(set(obs.scene.snr_db.tolist()))
                thresholds = threshold_table(config, snrs, target_cofar, calib_trials, calib_seed, threads)
            thr = np.array([thresholds.lookup(s) for s in obs.scene.snr_db])
        accepted = solved & (np.nan_to_num(ap, nan=-1.0) >= thr)
    else:
        accepted = solved.copy()

    correct = solved & np.all(a_hat == obs.true_a, axis=1)
    n_acc = int(accepted.sum())
    err = (est - truth)[:, [0, 2]]
    return ReconstructionReport(
        mode=mode,
        accepted_pct=100.0 * n_acc / n,
        correct_pct=100.0 * int((correct & accepted).sum()) / n_acc if n_acc else math.nan,
        rmse_all_m=_rmse(err[accepted]),
        rmse_correct_m=_rmse(err[accepted & correct]),
        truth=truth,
        estimate=est,
        ap=ap,
        ap_thr=thr,
        accepted=accepted,
        correct=correct,
        true_a=obs.true_a,
        a_hat=a_hat,
        channel_names=config.channel_names,
    )
