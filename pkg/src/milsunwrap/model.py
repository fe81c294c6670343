"""Interferometric measurement model: geometry, design matrices, noise covariance."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class ConfigurationError(ValueError):
    """Raised when a system configuration cannot support the estimation problem."""


@dataclass(frozen=True)
class InterferometricChannel:
    """One interferometric phase measurement: an antenna pair at one frequency.

    Parameters
    ----------
    frequency_hz : float
        Carrier (subband centre) frequency.
    baseline_m : tuple of float
        Baseline vector ``(d1, d3)``: horizontal and vertical components.
    antenna_group : str
        Label of the reference antenna. Two channels at the same frequency
        with the same label share that antenna and their noise is correlated.
    name : str
        Free-form label used for CSV column names.
    """

    frequency_hz: float
    baseline_m: tuple[float, float]
    antenna_group: str = ""
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "baseline_m", tuple(float(v) for v in self.baseline_m))
        if len(self.baseline_m) != 2:
            raise ConfigurationError("baseline must have two components (d1, d3)")
        if not self.frequency_hz > 0:
            raise ConfigurationError(f"frequency must be positive, got {self.frequency_hz}")
        if not any(self.baseline_m):
            raise ConfigurationError("baseline vector must be non-zero")

    @property
    def baseline_norm(self) -> float:
        return math.hypot(*self.baseline_m)


@dataclass(frozen=True)
class SystemConfig:
    """Sensor geometry plus the prior on target extent.

    The stacked baselines must span the (xi1, xi3) plane; this is checked at
    construction so every downstream solver has a well-posed real part.
    """

    channels: tuple[InterferometricChannel, ...]
    range_m: float
    max_target_length_m: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) < 2:
            raise ConfigurationError("at least two interferometric channels are required")
        if not self.range_m > 0:
            raise ConfigurationError("range must be positive")
        if not self.max_target_length_m > 0:
            raise ConfigurationError("maximum target length must be positive")
        build_design_matrices(self)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def half_box(self) -> float:
        """Bound on |xi1| and |xi3|."""
        return self.max_target_length_m / 2

    @property
    def channel_names(self) -> list[str]:
        return [ch.name or f"ch{i}" for i, ch in enumerate(self.channels)]

    def to_dict(self) -> dict:
        return {
            "range_m": self.range_m,
            "max_target_length_m": self.max_target_length_m,
            "channels": [
                {
                    "name": ch.name,
                    "frequency_hz": ch.frequency_hz,
                    "baseline_m": list(ch.baseline_m),
                    "antenna_group": ch.antenna_group,
                }
                for ch in self.channels
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        try:
            channels = [
                InterferometricChannel(
                    frequency_hz=float(c["frequency_hz"]),
                    baseline_m=tuple(c["baseline_m"]),
                    antenna_group=str(c.get("antenna_group", "")),
                    name=str(c.get("name", "")),
                )
                for c in d["channels"]
            ]
            return cls(channels, float(d["range_m"]), float(d["max_target_length_m"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed configuration: {exc!r}") from exc


@dataclass(frozen=True)
class NoiseModel:
    snr_linear: float
    coherence: float = field(init=False)
    phase_variance: float = field(init=False)

    def __post_init__(self):
        if not self.snr_linear > 0:
            raise ValueError(f"SNR must be positive, got {self.snr_linear}")
        gamma = 1.0 / (1.0 + 1.0 / self.snr_linear)
        # (1 - g^2) / (2 g^2) written to avoid cancellation as g -> 1
        inv = 1.0 / self.snr_linear
        var = inv * (2.0 + inv) / 2.0
        object.__setattr__(self, "coherence", gamma)
        object.__setattr__(self, "phase_variance", var)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_linear)

    @property
    def phase_std(self) -> float:
        return math.sqrt(self.phase_variance)


@dataclass(frozen=True)
class ScattererCoords:
    xi1: float
    xi2: float
    xi3: float

    @property
    def b(self) -> np.ndarray:
        """The estimable part ``[xi1, xi3]``."""
        return np.array([self.xi1, self.xi3])


def snr_db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def coherence_and_variance(snr_linear: float) -> NoiseModel:
    """Coherence and interferometric phase variance for an SNR-limited channel."""
    return NoiseModel(float(snr_linear))


def build_design_matrices(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, B)`` with ``A = 2*pi*I`` and ``B[a] = 4*pi*f_a*d_a / (R0*c)``."""
    m = len(config.channels)
    A = 2.0 * np.pi * np.eye(m)
    B = np.array(
        [
            [4.0 * np.pi * ch.frequency_hz * d / (config.range_m * SPEED_OF_LIGHT) for d in ch.baseline_m]
            for ch in config.channels
        ]
    )
    if np.linalg.matrix_rank(B) < 2:
        raise ConfigurationError("baselines do not span the (xi1, xi3) plane")
    return A, B


def unambiguous_height(channel: InterferometricChannel, range_m: float) -> float:
    return SPEED_OF_LIGHT * range_m / (2.0 * channel.frequency_hz * channel.baseline_norm)


def build_covariance(config: SystemConfig, sigma_phi_sq: float) -> np.ndarray:
    """Interferometric phase covariance.

    Diagonal is ``sigma_phi_sq``. Channels at the same frequency that share a
    reference antenna (same ``antenna_group``) have covariance
    ``sigma_phi_sq / 2``; everything else is uncorrelated.
    """
    if not sigma_phi_sq > 0:
        raise ValueError("phase variance must be positive")
    chans = config.channels
    m = len(chans)
    Q = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            a, b = chans[i], chans[j]
            if a.frequency_hz == b.frequency_hz and a.antenna_group and a.antenna_group == b.antenna_group:
                Q[i, j] = Q[j, i] = 0.5
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("channel covariance is not positive definite") from exc
    return sigma_phi_sq * Q


def fisher_covariance(config: SystemConfig, sigma_phi_sq: float) -> np.ndarray:
    """``(B^T Q^-1 B)^-1``: covariance of (xi1, xi3) when the integers are right."""
    _, B = build_design_matrices(config)
    Q = build_covariance(config, sigma_phi_sq)
    return np.linalg.inv(B.T @ np.linalg.solve(Q, B))


def fisher_rmse(config: SystemConfig, sigma_phi_sq: float) -> float:
    """Predicted position RMSE, ``sqrt(trace((B^T Q^-1 B)^-1))``."""
    return float(np.sqrt(np.trace(fisher_covariance(config, sigma_phi_sq))))


def wrap_phase(phi):
    """Wrap to the half-open interval [-pi, pi).

    Values already inside the interval are returned unchanged, so the
    operation is exactly idempotent.
    """
    phi = np.asarray(phi, dtype=float)
    inside = (phi >= -np.pi) & (phi < np.pi)
    w = np.mod(phi + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w >= np.pi, w - 2.0 * np.pi, w)
    out = np.where(inside, phi, w)
    return out if out.ndim else float(out)


def load_config(path: str | Path) -> SystemConfig:
    with open(path) as fh:
        return SystemConfig.from_dict(json.load(fh))


def save_config(config: SystemConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2)


def case_study_config() -> SystemConfig:
    """L-shaped dual-frequency setup: 9.8/10.2 GHz, 2 m baselines, R0 = 1.5 km, Lmax = 200 m."""
    text = resources.files("milsunwrap").joinpath("data/case_study.json").read_text()
    return SystemConfig.from_dict(json.loads(text))
