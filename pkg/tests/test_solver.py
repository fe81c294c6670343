import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import checks
from milsunwrap import (
    InterferometricChannel,
    MilsProblem,
    MilsSolver,
    NoAdmissibleSolution,
    SystemConfig,
    build_covariance,
    build_design_matrices,
    conditional_real_estimate,
    fisher_covariance,
    fisher_rmse,
    integer_bounds,
    make_problem,
    solve,
    wrap_phase,
)
from milsunwrap.montecarlo import phase_variance_db, simulate_pool
from milsunwrap.solver import raw_integer_bounds, solver_for
from oracles import direct_cost, fisher_trace_closed_form, normal_equations_estimate

C = 299_792_458.0


def _bound_oracle(f, d1, d3, lmax, r0, sigma, c=C):
    return (math.pi + 4 * math.pi * f * (abs(d1) + abs(d3)) * lmax / (2 * r0 * c) + 5 * sigma) / (2 * math.pi)


# --- integer bounds -------------------------------------------------------


def test_integer_bounds_case_study(cfg, sigma_sq_25):
    s = math.sqrt(sigma_sq_25)
    raw = raw_integer_bounds(cfg, s)
    expect = [_bound_oracle(ch.frequency_hz, *ch.baseline_m, 200.0, 1500.0, s) for ch in cfg.channels]
    assert_allclose(raw, expect, rtol=1e-14)
    assert list(integer_bounds(cfg, s)) == [10, 10, 10, 10]
    # 10.2 GHz channels: about 9.61 (quoted as "about 9.65")
    assert abs(raw[2] - 9.61) < 0.01
    assert abs(raw[2] - 9.65) / 9.65 < 5e-3


def test_integer_bounds_degenerate_limit():
    cfg = SystemConfig([InterferometricChannel(9.8e9, (2, 0)), InterferometricChannel(9.8e9, (0, 2))], 1500.0, 1e-9)
    assert list(integer_bounds(cfg, 0.0)) == [1, 1]


def test_integer_bounds_per_channel_sigma(cfg):
    k = integer_bounds(cfg, [0.0, 0.0, 0.0, 30.0])
    assert k[3] > k[2]


def test_integer_bounds_negative_sigma(cfg):
    with pytest.raises(ValueError):
        integer_bounds(cfg, -1.0)


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_integer_bounds_monotone_in_sigma(s1, s2):
    from milsunwrap import case_study_config

    cfg = case_study_config()
    lo, hi = sorted((s1, s2))
    assert np.all(integer_bounds(cfg, lo) <= integer_bounds(cfg, hi))


# --- Fisher information ---------------------------------------------------


def test_fisher_matches_closed_form(cfg, sigma_sq_25):
    tr = float(np.trace(fisher_covariance(cfg, sigma_sq_25)))
    assert_allclose(tr, fisher_trace_closed_form(9.8e9, 10.2e9, 2.0, 1500.0, C, sigma_sq_25), rtol=1e-12)
    cov = fisher_covariance(cfg, sigma_sq_25)
    assert_allclose(cov[0, 1] / cov[0, 0], 0.5, rtol=1e-10)
    assert_allclose(cov[0, 0], cov[1, 1], rtol=1e-12)


def test_fisher_quoted_values(cfg, sigma_sq_25):
    tr = float(np.trace(fisher_covariance(cfg, sigma_sq_25)))
    # 0.010174 m^2 and 0.0713 m per axis are quoted with c = 3e8 and a rounded variance
    assert abs(tr - 0.010174) / 0.010174 < 5e-3
    assert abs(math.sqrt(tr / 2) - 0.0713) / 0.0713 < 5e-3
    assert abs(fisher_rmse(cfg, sigma_sq_25) - 0.10) <= 0.005


def test_solver_fisher_agrees(cfg, sigma_sq_25):
    A, B = build_design_matrices(cfg)
    s = MilsSolver(A, B, build_covariance(cfg, sigma_sq_25), cfg.half_box, [1, 1, 1, 1])
    assert_allclose(s.fisher_covariance, fisher_covariance(cfg, sigma_sq_25), rtol=1e-10)


# --- single solves --------------------------------------------------------


def _noiseless(cfg, xi, snr=25.0):
    _, B = build_design_matrices(cfg)
    phi = B @ np.asarray(xi, float)
    y = wrap_phase(phi)
    a = np.rint((y - phi) / (2 * np.pi)).astype(int)
    s2 = phase_variance_db(snr)
    return make_problem(cfg, y, s2), a, integer_bounds(cfg, math.sqrt(s2))


def test_noiseless_recovery(cfg):
    prob, a, bounds = _noiseless(cfg, (30.0, 7.0))
    sol = solve(prob, bounds)
    assert np.array_equal(sol.a_hat, a)
    assert_allclose(sol.b_hat.b, [30.0, 7.0], atol=1e-9)
    assert sol.cost_min < 1e-12
    assert sol.ap > 0.95
    assert math.isnan(sol.b_hat.xi2)
    # zero-noise limit: every competitor has infinite relative cost
    limit = solver_for(cfg, tuple(bounds)).solve(prob.y, math.inf, keep_candidates=False)
    assert np.array_equal(limit.a_hat, a)
    assert limit.ap == 1.0


def test_noiseless_origin(cfg):
    prob, a, bounds = _noiseless(cfg, (0.0, 0.0))
    sol = solve(prob, bounds)
    assert not a.any() and not sol.a_hat.any()
    assert_allclose(sol.b_hat.b, [0, 0], atol=1e-12)


def test_noiseless_grid_recovery(cfg):
    assert checks.check_noiseless_grid(cfg) == []


def test_single_solve_runtime(cfg):
    prob, _, bounds = _noiseless(cfg, (12.0, -40.0))
    solve(prob, bounds)
    t0 = time.perf_counter()
    sol = solve(prob, bounds)
    assert time.perf_counter() - t0 < 1.0
    assert len(sol.candidates) == sol.n_admissible <= 21**4


def test_conditional_estimate_matches_normal_equations(cfg, rng, sigma_sq_25):
    A, B = build_design_matrices(cfg)
    Q = build_covariance(cfg, sigma_sq_25)
    for _ in range(20):
        y = wrap_phase(rng.uniform(-4, 4, 4))
        a = rng.integers(-10, 11, 4)
        b, cost = conditional_real_estimate(MilsProblem(y, A, B, Q, 100.0), a)
        b_ref, cost_ref = normal_equations_estimate(y, A, B, Q, a)
        assert_allclose(b, b_ref, rtol=1e-9, atol=1e-9)
        assert_allclose(cost, cost_ref, rtol=1e-8)


def test_candidate_table_matches_direct_cost(cfg, rng, sigma_sq_25):
    A, B = build_design_matrices(cfg)
    Q = build_covariance(cfg, sigma_sq_25)
    solver = MilsSolver(A, B, Q, cfg.half_box, [3, 3, 3, 3])
    y = wrap_phase(rng.uniform(-4, 4, 4))
    b, cost, _ = solver.evaluate(y)
    for i in rng.choice(len(solver.grid), 40, replace=False):
        b_ref, c_ref = normal_equations_estimate(y, A, B, Q, solver.grid[i])
        assert_allclose(b[i], b_ref, atol=1e-8)
        assert_allclose(cost[i], c_ref, rtol=1e-8)
        assert_allclose(direct_cost(y, A, B, Q, solver.grid[i], b[i]), c_ref, rtol=1e-8)


def test_kernel_matches_reference_path(cfg, rng, sigma_sq_25):
    solver = solver_for(cfg, tuple(integer_bounds(cfg, math.sqrt(sigma_sq_25))))
    _, B = build_design_matrices(cfg)
    Q = build_covariance(cfg, sigma_sq_25)
    Y = []
    for _ in range(30):
        y, _ = checks.noisy_phases(B, Q, rng.uniform(-100, 100, 2), rng)
        Y.append(y)
        ref = solver.solve(y, 1 / sigma_sq_25)
        fast = solver.solve(y, 1 / sigma_sq_25, keep_candidates=False)
        assert np.array_equal(ref.a_hat, fast.a_hat)
        assert_allclose(fast.cost_min, ref.cost_min, rtol=1e-9, atol=1e-12)
        assert_allclose(fast.ap, ref.ap, rtol=1e-9)
        assert fast.n_admissible == ref.n_admissible
        assert fast.candidates is None
    idx, cost, ap, nadm, b = solver.solve_many(np.array(Y), 1 / sigma_sq_25)
    for k, y in enumerate(Y):
        ref = solver.solve(y, 1 / sigma_sq_25)
        assert np.array_equal(solver.grid[idx[k]], ref.a_hat)
        assert_allclose(b[k], ref.b_hat.b, atol=1e-12)
        assert_allclose(ap[k], ref.ap, rtol=1e-9)


def _two_channel_identity(half_box):
    # B = I: b(a) = y - 2 pi a, and with two channels every candidate costs 0
    return MilsSolver(2 * np.pi * np.eye(2), np.eye(2), np.eye(2), half_box, [2, 2])


def test_all_tied_costs():
    s = _two_channel_identity(4.0)
    sol = s.solve(np.array([-3.0, 0.0]))
    assert sol.n_admissible == 2  # a1 in {0, -1}, a2 = 0
    assert np.array_equal(sol.a_hat, [0, 0])
    assert sol.ap == pytest.approx(0.5)
    fast = s.solve(np.array([-3.0, 0.0]), math.inf, keep_candidates=False)
    assert np.array_equal(fast.a_hat, [0, 0])
    assert fast.ap == pytest.approx(0.5)


def test_tie_break_prefers_small_l1_then_lexicographic():
    s = _two_channel_identity(4.0)
    # all costs are 0; push a = 0 out of the box so four L1 = 1 candidates tie
    s.Bc = np.zeros_like(s.Bc)
    s.Bc[np.flatnonzero(s.l1 == 0)] = 50.0
    y = np.zeros(2)
    for sol in (s.solve(y), s.solve(y, keep_candidates=False)):
        assert np.array_equal(sol.a_hat, [-1, 0])  # first L1-minimal entry in row-major order
        assert sol.n_admissible == 24
        assert sol.ap == pytest.approx(1 / 24)


def test_no_admissible_raises():
    s = _two_channel_identity(0.1)
    y = np.array([2.0, 2.0])
    with pytest.raises(NoAdmissibleSolution):
        s.solve(y)
    with pytest.raises(NoAdmissibleSolution):
        s.solve(y, keep_candidates=False)
    idx, cost, ap, nadm, b = s.solve_many(y[None], 1.0)
    assert idx[0] == -1 and nadm[0] == 0 and math.isnan(ap[0]) and np.isnan(b[0]).all()


def test_problem_validation(cfg, sigma_sq_25):
    A, B = build_design_matrices(cfg)
    Q = build_covariance(cfg, sigma_sq_25)
    with pytest.raises(ValueError):
        MilsProblem(np.array([3.5, 0, 0, 0]), A, B, Q, 100.0)
    with pytest.raises(ValueError):
        MilsProblem(np.array([np.pi, 0, 0, 0]), A, B, Q, 100.0)
    with pytest.raises(ValueError):
        MilsProblem(np.zeros(3), A, B, Q, 100.0)
    with pytest.raises(ValueError):
        MilsProblem(np.zeros(4), A, B, Q + np.triu(np.ones((4, 4)), 1), 100.0)


def test_keep_candidates_needs_finite_scale(cfg, sigma_sq_25):
    solver = solver_for(cfg, (2, 2, 2, 2))
    with pytest.raises(ValueError):
        solver.solve(np.zeros(4), math.inf)


def test_candidate_set_lookup(cfg, sigma_sq_25):
    prob, a, bounds = _noiseless(cfg, (5.0, 5.0))
    sol = solve(prob, bounds)
    i = sol.candidates.index_of(sol.a_hat)
    assert sol.candidates.cost[i] == sol.cost_min
    with pytest.raises(KeyError):
        sol.candidates.index_of([99, 99, 99, 99])
    first = next(iter(sol.candidates))
    assert first.in_box


# --- structural properties -----------------------------------------------


def test_wrap_shift_equivariance(cfg, rng):
    assert checks.check_wrap_shift(cfg, rng, n=20) == []


def test_covariance_scaling(cfg, rng):
    assert checks.check_q_scaling(cfg, rng, n=8) == []


def test_posterior_normalisation(cfg, rng):
    assert checks.check_posterior_normalisation(cfg, rng, n=15) == []


def test_brute_force_oracle_agreement(cfg, rng):
    assert checks.check_oracle_agreement(cfg, rng, n=20) == []


def test_horizontal_vertical_symmetry(cfg, rng, sigma_sq_25):
    swapped = SystemConfig(
        [InterferometricChannel(c.frequency_hz, c.baseline_m[::-1], c.antenna_group, c.name) for c in cfg.channels],
        cfg.range_m,
        cfg.max_target_length_m,
    )
    _, B = build_design_matrices(cfg)
    Q = build_covariance(cfg, sigma_sq_25)
    bounds = integer_bounds(cfg, math.sqrt(sigma_sq_25))
    for _ in range(10):
        y, _ = checks.noisy_phases(B, Q, rng.uniform(-100, 100, 2), rng)
        s = solve(make_problem(cfg, y, sigma_sq_25), bounds, keep_candidates=False)
        t = solve(make_problem(swapped, y, sigma_sq_25), bounds, keep_candidates=False)
        assert np.array_equal(s.a_hat, t.a_hat)
        assert_allclose(s.b_hat.b, t.b_hat.b[::-1], atol=1e-9)
        assert_allclose(s.ap, t.ap, rtol=1e-9)


def test_min_cost_is_chi_square(cfg):
    # with the integers right the minimum cost is chi^2 with m - 2 = 2 degrees of freedom
    pool = simulate_pool(cfg, 35.0, 10_000, seed=7)
    c = pool.cost_min[pool.correct]
    assert pool.correct.mean() > 0.99
    assert abs(c.mean() - 2.0) / 2.0 < 0.05
