"""
The dual-frequency L-shaped interferometer
==========================================

Geometry, design matrices and phase noise for the bundled configuration.
"""

import numpy as np

from milsunwrap import (
    build_covariance,
    build_design_matrices,
    case_study_config,
    coherence_and_variance,
    fisher_rmse,
    snr_db_to_linear,
    unambiguous_height,
)

cfg = case_study_config()
for ch in cfg.channels:
    print(f"{ch.name}: {ch.frequency_hz / 1e9:.1f} GHz, baseline {ch.baseline_m}, "
          f"unambiguous height {unambiguous_height(ch, cfg.range_m):.3f} m")

# A multiplies the integer cycle counts, B maps (xi1, xi3) to phase
A, B = build_design_matrices(cfg)
print("B [rad/m] =\n", B.round(5))

# channels sharing a reference antenna at one frequency are correlated
noise = coherence_and_variance(snr_db_to_linear(25.0))
print(f"25 dB: coherence {noise.coherence:.6f}, phase variance {noise.phase_variance:.4e} rad^2")
Q = build_covariance(cfg, noise.phase_variance)
print("Q / sigma^2 =\n", Q / noise.phase_variance)

# best achievable position error once the integers are right
for snr in (15, 20, 25, 30, 35):
    s2 = coherence_and_variance(snr_db_to_linear(snr)).phase_variance
    print(f"{snr} dB: predicted RMSE {fisher_rmse(cfg, s2):.4f} m")
