"""
Acceptance and failure rates versus threshold
=============================================

Monte Carlo over scatterers placed uniformly in the target box. AccR is the
fraction accepted, CoFaR the fraction of accepted ones with wrong integers.
"""

from milsunwrap import case_study_config
from milsunwrap.montecarlo import draw_unit_trials, performance_grid, roc_auc, roc_from_pool, simulate_pool

cfg = case_study_config()
snrs = [15.0, 20.0, 25.0, 30.0]
grid = performance_grid(cfg, snrs, [0.0, 0.5, 0.8, 0.9, 0.95], n_trials=10_000, seed=0)
for snr, thr, accr, cofar, discarded in grid.rows():
    flag = "  (AccR < 10 %)" if discarded else ""
    print(f"{snr:4.0f} dB  thr {thr:.2f}  AccR {accr:.3f}  CoFaR {cofar:.3f}{flag}")

# the same trials at every SNR, so curves differ only through the noise level
draws = draw_unit_trials(cfg, 10_000, seed=0)
for snr in snrs:
    pool = simulate_pool(cfg, snr, 10_000, seed=0, draws=draws)
    print(f"{snr:.0f} dB: {pool.failure_rate:.1%} wrong before rejection, "
          f"ROC area {roc_auc(roc_from_pool(pool)):.3f}")
