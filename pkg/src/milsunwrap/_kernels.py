"""Compiled candidate scan used by the batch (Monte Carlo / scene) paths.

Costs are ``scale * ||z - Zc[i]||^2`` and real estimates ``gy - Bc[i]``;
see :class:`milsunwrap.solver.MilsSolver` for how these are formed.
"""

import numpy as np
from numba import njit

# exp(-x) is exactly 0.0 in float64 for x > ~745, so these terms are skipped
_EXP_CUTOFF = 1500.0


@njit(cache=True, nogil=True)
def scan(z, gy, Zc, Bc, half, scale, l1):
    """Single pass over all candidates.

    Returns ``(best index, best cost, log normaliser, number admissible)``
    where the normaliser is ``sum_i exp(-(c_i - c_best) / 2)`` over the
    admissible set, accumulated online and rescaled whenever the running
    minimum drops. With ``scale = inf`` (noise-free limit) it counts the
    candidates tied at the minimum. Index is -1 when nothing is admissible.
    """
    n = Zc.shape[0]
    r = Zc.shape[1]
    g0 = gy[0]
    g1 = gy[1]
    hs = 0.5 * scale
    best = np.inf
    bi = -1
    n_adm = 0
    total = 0.0
    for i in range(n):
        if abs(g0 - Bc[i, 0]) > half or abs(g1 - Bc[i, 1]) > half:
            continue
        n_adm += 1
        c = 0.0
        for j in range(r):
            d = z[j] - Zc[i, j]
            c += d * d
        if c < best:
            if bi >= 0:
                x = hs * (best - c)
                total = total * np.exp(-x) if x < _EXP_CUTOFF else 0.0
            total += 1.0
            best = c
            bi = i
        elif c == best:
            total += 1.0
            if l1[i] < l1[bi]:
                bi = i
        else:
            x = hs * (c - best)
            if x < _EXP_CUTOFF:
                total += np.exp(-x)
    if bi < 0:
        return -1, np.inf, np.nan, 0
    cost = best * scale if np.isfinite(scale) else 0.0
    return bi, cost, np.log(total), n_adm


@njit(cache=True, nogil=True)
def scan_many(Z, GY, Zc, Bc, half, scales, l1, out_idx, out_cost, out_lognorm, out_nadm):
    for t in range(Z.shape[0]):
        bi, c, ln, na = scan(Z[t], GY[t], Zc, Bc, half, scales[t], l1)
        out_idx[t] = bi
        out_cost[t] = c
        out_lognorm[t] = ln
        out_nadm[t] = na
