"""Ambiguity posterior and the accept/reject test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class ApDecision:
    ap: float
    threshold: float
    accepted: bool


def _costs(candidates) -> np.ndarray:
    cost = getattr(candidates, "cost", None)
    if cost is None or np.ndim(cost) == 0:
        cost = [c.cost for c in candidates]
    return np.asarray(cost, dtype=float)


def candidate_posteriors(costs) -> np.ndarray:
    """Posterior of every candidate, proportional to ``exp(-cost / 2)``.

    Evaluated in the log domain relative to the smallest cost, so costs in
    the thousands do not underflow.
    """
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        raise ValueError("empty candidate set")
    logw = -(c - c.min()) / 2
    return np.exp(logw - logsumexp(logw))


def ambiguity_posterior(candidates, a_hat) -> float:
    """Posterior probability of ``a_hat`` among the admissible candidates.

    ``candidates`` is a :class:`~milsunwrap.solver.CandidateSet` or any
    sequence of objects with ``a`` and ``cost`` attributes.
    """
    c = _costs(candidates)
    if c.size == 0:
        raise ValueError("empty candidate set")
    if hasattr(candidates, "index_of"):
        try:
            i = candidates.index_of(a_hat)
        except KeyError as exc:
            raise ValueError(str(exc)) from None
    else:
        target = np.asarray(a_hat)
        hits = [k for k, cand in enumerate(candidates) if np.array_equal(np.asarray(cand.a), target)]
        if not hits:
            raise ValueError(f"candidate {a_hat} not in the admissible set")
        i = hits[0]
    logw = -(c - c.min()) / 2
    return float(np.exp(logw[i] - logsumexp(logw)))


def accept(ap: float, threshold: float) -> ApDecision:
    """Accept when ``ap >= threshold``."""
    for name, v in (("ap", ap), ("threshold", threshold)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return ApDecision(float(ap), float(threshold), bool(ap >= threshold))
