import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from milsunwrap import CandidateEvaluation, CandidateSet, accept, ambiguity_posterior, candidate_posteriors


def _set(costs):
    costs = np.asarray(costs, float)
    a = np.arange(len(costs))[:, None] * np.ones((1, 4), int)
    return CandidateSet(a.astype(int), np.zeros((len(costs), 2)), costs)


def _ap_reference(costs, i):
    # direct normalisation without log-domain tricks, fine for modest costs
    w = np.exp(-np.asarray(costs, float) / 2)
    return w[i] / w.sum()


def test_single_candidate():
    assert ambiguity_posterior(_set([17.0]), [0, 0, 0, 0]) == 1.0


def test_equal_costs():
    assert ambiguity_posterior(_set([3.0, 3.0]), [0, 0, 0, 0]) == pytest.approx(0.5)


def test_gap_of_twenty():
    ap = ambiguity_posterior(_set([0.0, 20.0]), [0, 0, 0, 0])
    assert ap == pytest.approx(1 / (1 + math.exp(-10)), rel=1e-12)
    assert ap == pytest.approx(0.9999546, abs=1e-7)


def test_large_costs_do_not_underflow():
    ap = ambiguity_posterior(_set([5000.0, 5001.0, 9000.0]), [0, 0, 0, 0])
    assert ap == pytest.approx(1 / (1 + math.exp(-0.5)), rel=1e-12)


def test_plain_sequence_of_evaluations():
    cands = [CandidateEvaluation(np.array([i, 0]), np.zeros(2), float(c), True) for i, c in enumerate([1.0, 2.0, 4.0])]
    assert_allclose(ambiguity_posterior(cands, [1, 0]), _ap_reference([1, 2, 4], 1), rtol=1e-12)


def test_empty_and_missing():
    with pytest.raises(ValueError):
        ambiguity_posterior(_set([]), [0, 0, 0, 0])
    with pytest.raises(ValueError):
        ambiguity_posterior(_set([1.0]), [9, 9, 9, 9])
    with pytest.raises(ValueError):
        candidate_posteriors([])


costs_st = st.lists(st.floats(0, 300), min_size=1, max_size=30)


@given(costs_st)
def test_posteriors_normalised(costs):
    p = candidate_posteriors(costs)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.all(p >= 0)


@given(costs_st)
def test_matches_direct_normalisation(costs):
    assert_allclose(candidate_posteriors(costs), _ap_reference(costs, slice(None)), rtol=1e-9, atol=1e-300)


@given(costs_st, st.floats(-1e3, 1e3))
def test_shift_invariance(costs, shift):
    assume(min(costs) + shift >= 0)
    assert_allclose(candidate_posteriors(np.add(costs, shift)), candidate_posteriors(costs), rtol=1e-9, atol=1e-15)


@given(st.floats(0, 50), st.floats(0.01, 50), st.lists(st.floats(0, 100), max_size=10))
def test_ap_grows_with_gap(gap, extra, others):
    c0 = [0.0, gap] + [gap + o for o in others]
    c1 = [0.0, gap + extra] + [gap + extra + o for o in others]
    assert ambiguity_posterior(_set(c1), [0, 0, 0, 0]) >= ambiguity_posterior(_set(c0), [0, 0, 0, 0])


@given(st.lists(st.floats(0, 20), min_size=2, max_size=12))
def test_ap_tends_to_uniform_when_costs_shrink(costs):
    # scaling costs by s -> 0 (noise variance -> infinity) flattens the posterior
    s = 1e-9
    p = candidate_posteriors(np.asarray(costs) * s)
    assert_allclose(p, 1 / len(costs), atol=1e-8)


@given(st.lists(st.floats(0, 20), min_size=1, max_size=12))
def test_ap_bounds(costs):
    best = int(np.argmin(costs))
    ap = ambiguity_posterior(_set(costs), [best] * 4)
    assert 1 / len(costs) - 1e-12 <= ap <= 1.0


def test_accept_examples():
    assert accept(0.9, 0.84).accepted
    assert not accept(0.5, 0.84).accepted
    assert accept(0.84, 0.84).accepted
    d = accept(1.0, 0.0)
    assert d.accepted and d.ap == 1.0 and d.threshold == 0.0


@pytest.mark.parametrize("ap, thr", [(1.2, 0.5), (0.5, -0.1), (math.nan, 0.5), (0.5, 1.01)])
def test_accept_rejects_bad_inputs(ap, thr):
    with pytest.raises(ValueError):
        accept(ap, thr)
