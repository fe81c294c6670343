"""Per-scatterer mixed-integer least squares: enumerate, estimate, select."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from milsunwrap import _kernels
from milsunwrap.model import (
    SPEED_OF_LIGHT,
    ConfigurationError,
    ScattererCoords,
    SystemConfig,
    build_covariance,
    build_design_matrices,
)
from milsunwrap.quality import ambiguity_posterior

# relative slack on the box test, so noiseless scatterers exactly on the edge stay admissible
BOX_RTOL = 1e-9


class NoAdmissibleSolution(RuntimeError):
    """No integer candidate yields a real estimate inside the target box."""


@dataclass(frozen=True)
class MilsProblem:
    """One scatterer: wrapped phases ``y`` with model ``y = A a + B b + e``, ``e ~ N(0, Q_yy)``."""

    y: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Q_yy: np.ndarray
    half_box: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        Q = np.asarray(self.Q_yy, dtype=float)
        m = y.shape[0]
        if y.ndim != 1 or A.shape[0] != m or B.shape[0] != m or Q.shape != (m, m):
            raise ValueError("inconsistent problem dimensions")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q_yy must be symmetric")
        if np.any(y < -np.pi) or np.any(y >= np.pi):
            raise ValueError("wrapped phases must lie in [-pi, pi)")
        if not self.half_box > 0:
            raise ValueError("half_box must be positive")
        for name, val in (("y", y), ("A", A), ("B", B), ("Q_yy", Q)):
            object.__setattr__(self, name, val)

    @property
    def m(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class CandidateEvaluation:
    a: np.ndarray
    b_of_a: np.ndarray
    cost: float
    in_box: bool


@dataclass(frozen=True)
class CandidateSet:
    """Admissible candidates of one solve, stored column-wise."""

    a: np.ndarray  # (N, n) int
    b: np.ndarray  # (N, 2)
    cost: np.ndarray  # (N,)

    def __len__(self) -> int:
        return self.cost.shape[0]

    def __iter__(self) -> Iterator[CandidateEvaluation]:
        for i in range(len(self)):
            yield CandidateEvaluation(self.a[i], self.b[i], float(self.cost[i]), True)

    def index_of(self, a) -> int:
        hits = np.flatnonzero(np.all(self.a == np.asarray(a), axis=1))
        if hits.size == 0:
            raise KeyError(f"candidate {a} not in the admissible set")
        return int(hits[0])


@dataclass(frozen=True)
class MilsSolution:
    a_hat: np.ndarray
    b_hat: ScattererCoords
    cost_min: float
    ap: float
    n_admissible: int
    candidates: CandidateSet | None = None


def raw_integer_bounds(config: SystemConfig, sigma_phi) -> np.ndarray:
    """Per-channel bound on ``|k|`` from the target box and a 5-sigma noise allowance.

    ``sigma_phi`` may be a scalar or one value per channel.
    """
    sig = np.broadcast_to(np.asarray(sigma_phi, dtype=float), (config.n_channels,))
    if np.any(sig < 0):
        raise ValueError("sigma_phi must be non-negative")
    out = []
    for ch, s in zip(config.channels, sig):
        d_sum = abs(ch.baseline_m[0]) + abs(ch.baseline_m[1])
        geo = 4 * math.pi * ch.frequency_hz * d_sum * config.max_target_length_m / (2 * config.range_m * SPEED_OF_LIGHT)
        out.append((math.pi + geo + 5 * s) / (2 * math.pi))
    return np.array(out)


def integer_bounds(config: SystemConfig, sigma_phi) -> np.ndarray:
    """:func:`raw_integer_bounds` rounded up to integers."""
    return np.ceil(raw_integer_bounds(config, sigma_phi)).astype(int)


def _whiten(A, B, Q):
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("Q_yy is not positive definite") from exc
    Aw = solve_triangular(L, A, lower=True)
    Bw = solve_triangular(L, B, lower=True)
    return L, Aw, Bw


def conditional_real_estimate(problem: MilsProblem, a) -> tuple[np.ndarray, float]:
    """Best real parameters for a fixed integer vector, and the resulting cost.

    Solved as ordinary least squares on Cholesky-whitened quantities.
    """
    L, Aw, Bw = _whiten(problem.A, problem.B, problem.Q_yy)
    yw = solve_triangular(L, problem.y, lower=True)
    r = yw - Aw @ np.asarray(a, dtype=float)
    Qf, R = np.linalg.qr(Bw)
    if np.linalg.matrix_rank(R) < R.shape[1]:
        raise ConfigurationError("normal matrix B^T Q^-1 B is singular")
    b = solve_triangular(R, Qf.T @ r)
    res = r - Bw @ b
    return b, float(res @ res)


def _candidate_grid(bounds) -> np.ndarray:
    """Row-major enumeration of the integer box ``|a_i| <= bounds[i]``."""
    axes = [np.arange(-k, k + 1) for k in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


class MilsSolver:
    """Factorisations and candidate tables shared by every solve on one model.

    The covariance may be given up to a scale: solving with ``scale = s``
    uses ``Q_yy / s`` for the costs, so a solver built on the unit-variance
    covariance serves every SNR. Real estimates do not depend on the scale.
    """

    def __init__(self, A, B, Q_yy, half_box: float, bounds):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        Q = np.asarray(Q_yy, dtype=float)
        m, p = B.shape
        L, Aw, Bw = _whiten(A, B, Q)
        Qf, R = np.linalg.qr(Bw, mode="complete")
        R1 = R[:p]
        if np.linalg.matrix_rank(R1) < p:
            raise ConfigurationError("normal matrix B^T Q^-1 B is singular")
        Linv = solve_triangular(L, np.eye(m), lower=True)
        # b(a) = G (y - A a);  cost(a) = ||P (y - A a)||^2
        self.G = solve_triangular(R1, Qf[:, :p].T @ Linv)
        self.P = Qf[:, p:].T @ Linv
        self.fisher = Bw.T @ Bw
        self.A, self.B, self.Q_yy = A, B, Q
        self.half_box = float(half_box)
        self.bounds = np.asarray(bounds, dtype=int)
        self.grid = _candidate_grid(self.bounds)
        self.Zc = np.ascontiguousarray(self.grid @ (self.P @ A).T)
        self.Bc = np.ascontiguousarray(self.grid @ (self.G @ A).T)
        self.l1 = np.abs(self.grid).sum(axis=1)
        self._half_tol = self.half_box * (1 + BOX_RTOL)

    @property
    def fisher_covariance(self) -> np.ndarray:
        """Covariance of the real estimate given correct integers (unit scale)."""
        return np.linalg.inv(self.fisher)

    def evaluate(self, y, scale: float = 1.0):
        """Real estimates, costs and box flags for every candidate."""
        y = np.asarray(y, dtype=float)
        b = (self.G @ y) - self.Bc
        d = (self.P @ y) - self.Zc
        cost = scale * np.einsum("ij,ij->i", d, d)
        in_box = np.all(np.abs(b) <= self._half_tol, axis=1)
        return b, cost, in_box

    def solve(self, y, scale: float = 1.0, keep_candidates: bool = True) -> MilsSolution:
        if not keep_candidates:
            idx, cost, lognorm, n_adm = _kernels.scan(
                self.P @ y, self.G @ y, self.Zc, self.Bc, self._half_tol, float(scale), self.l1
            )
            if idx < 0:
                raise NoAdmissibleSolution("no integer candidate gives a real estimate inside the box")
            return self._solution(y, idx, cost, math.exp(-lognorm), n_adm)

        if not np.isfinite(scale):
            raise ValueError("candidate retention needs a finite cost scale")
        b, cost, in_box = self.evaluate(y, scale)
        adm = np.flatnonzero(in_box)
        if adm.size == 0:
            raise NoAdmissibleSolution("no integer candidate gives a real estimate inside the box")
        c = cost[adm]
        cmin = c.min()
        tied = adm[c == cmin]
        # smallest L1 norm, then first in row-major (lexicographic) order
        idx = int(tied[np.argmin(self.l1[tied])])
        cands = CandidateSet(self.grid[adm], b[adm], c)
        ap = ambiguity_posterior(cands, self.grid[idx])
        return self._solution(y, idx, float(cost[idx]), ap, adm.size, cands)

    def _solution(self, y, idx, cost, ap, n_adm, cands=None) -> MilsSolution:
        b = self.G @ np.asarray(y, dtype=float) - self.Bc[idx]
        return MilsSolution(
            a_hat=self.grid[idx].copy(),
            b_hat=ScattererCoords(float(b[0]), math.nan, float(b[1])),
            cost_min=float(cost),
            ap=float(ap),
            n_admissible=int(n_adm),
            candidates=cands,
        )

    def solve_many(self, Y, scales, out=None):
        """Batch solve without retaining candidates.

        Returns arrays ``(idx, cost, ap, n_admissible, b)``; ``idx == -1``
        marks rows with no admissible candidate.
        """
        Y = np.ascontiguousarray(Y, dtype=float)
        T = Y.shape[0]
        scales = np.broadcast_to(np.asarray(scales, dtype=float), (T,)).copy()
        Z = np.ascontiguousarray(Y @ self.P.T)
        GY = np.ascontiguousarray(Y @ self.G.T)
        idx = np.empty(T, dtype=np.int64)
        cost = np.empty(T)
        lognorm = np.empty(T)
        nadm = np.empty(T, dtype=np.int64)
        _kernels.scan_many(Z, GY, self.Zc, self.Bc, self._half_tol, scales, self.l1, idx, cost, lognorm, nadm)
        ok = idx >= 0
        b = np.full((T, 2), np.nan)
        b[ok] = GY[ok] - self.Bc[idx[ok]]
        ap = np.where(ok, np.exp(-np.where(ok, lognorm, 0.0)), np.nan)
        return idx, cost, ap, nadm, b


@lru_cache(maxsize=32)
def solver_for(config: SystemConfig, bounds: tuple[int, ...]) -> MilsSolver:
    """Unit-variance solver for a configuration; costs are scaled by ``1/sigma_phi^2`` at solve time."""
    A, B = build_design_matrices(config)
    return MilsSolver(A, B, build_covariance(config, 1.0), config.half_box, bounds)


def make_problem(config: SystemConfig, y, sigma_phi_sq: float) -> MilsProblem:
    A, B = build_design_matrices(config)
    return MilsProblem(np.asarray(y, dtype=float), A, B, build_covariance(config, sigma_phi_sq), config.half_box)


def solve(problem: MilsProblem, bounds: Sequence[int], keep_candidates: bool = True) -> MilsSolution:
    """Exhaustive maximum-likelihood solve of one scatterer.

    Every integer vector in the box ``|a_i| <= bounds[i]`` is scored; those
    whose real estimate falls outside ``|b_j| <= half_box`` are dropped, and
    the cheapest survivor wins. Raises :class:`NoAdmissibleSolution` when
    nothing survives.
    """
    solver = MilsSolver(problem.A, problem.B, problem.Q_yy, problem.half_box, bounds)
    return solver.solve(problem.y, 1.0, keep_candidates=keep_candidates)
