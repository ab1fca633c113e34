import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eoranking.core import CandidatePool, InclusionEstimate, delta_trace, expected_trace
from eoranking.errors import MissingLabels, SingleClass
from eoranking.metrics import (
    calibration_curve, effectiveness, evaluate, ndcg, platt_apply, platt_fit, unfairness_auc, uniform_cost_curve,
)
from eoranking.policies import eor_ranking, prp_ranking, rank

from conftest import pools, running_pool


def test_unfairness_alternating_pool_by_hand():
    # A and B identical [0.5, 0.5]: EOR alternates A,B,A,B -> |delta| = .5, 0, .5, 0
    p = CandidatePool.from_groups({"A": [0.5, 0.5], "B": [0.5, 0.5]})
    assert unfairness_auc(delta_trace(p, eor_ranking(p))) == pytest.approx(1.0, abs=1e-12)


def test_uniform_exact_effectiveness_is_zero():
    p = running_pool()
    tr = expected_trace(p, InclusionEstimate.exact_uniform(p.n))
    assert abs(effectiveness(tr)) < 1e-12
    assert uniform_cost_curve(4).tolist() == [0.75, 0.5, 0.25, 0.0]


def test_equal_probs_every_permutation_scores_zero():
    p = CandidatePool.from_groups({"A": [0.3] * 3, "B": [0.3] * 4})
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert abs(effectiveness(delta_trace(p, rng.permutation(p.n)))) < 1e-12


def test_ndcg_examples():
    p = running_pool()
    assert np.allclose(ndcg(p, prp_ranking(p)), 1.0)
    three = CandidatePool.from_groups({"A": [1.0, 0.5, 0.0]})
    assert ndcg(three, [2, 1, 0])[0] == 0.0
    zeros = CandidatePool(["a", "b"], [0, 0], [0.0, 0.0], ("A",))
    assert ndcg(zeros, [0, 1]).tolist() == [1.0, 1.0]
    with pytest.raises(MissingLabels):
        ndcg(p, prp_ranking(p), "labels")


@given(pools(max_n=30), st.integers(0, 2**32))
def test_ndcg_bounded(pool, seed):
    v = ndcg(pool, np.random.default_rng(seed).permutation(pool.n))
    assert np.all(v >= -1e-12) and np.all(v <= 1 + 1e-12)


@given(pools(max_n=30))
def test_prp_is_most_effective(pool):
    best = effectiveness(delta_trace(pool, prp_ranking(pool)))
    for kind in ("eor", "dp", "prr", "fairstar"):
        assert effectiveness(delta_trace(pool, rank(pool, kind))) <= best + 1e-9


@given(pools(max_n=30), st.integers(0, 2**32))
def test_unfairness_relabel_invariant(pool, seed):
    order = np.random.default_rng(seed).permutation(pool.n)
    a = unfairness_auc(delta_trace(pool, order))
    b = unfairness_auc(delta_trace(pool.relabel([1, 0]), order))
    assert a == pytest.approx(b, abs=1e-12)


def test_evaluate_report():
    p = running_pool()
    rep = evaluate(p, eor_ranking(p), with_ndcg=True)
    assert rep.unfairness >= 0 and rep.ndcg.shape == (p.n,)
    with pytest.raises(ValueError):
        evaluate(p)


def test_calibration_bernoulli():
    rng = np.random.default_rng(0)
    probs = rng.random(10**5)
    labels = (rng.random(10**5) < probs).astype(int)
    c = calibration_curve(probs, labels)
    assert c.counts.sum() == 10**5 and c.counts.size == 20
    assert np.all(np.diff(c.mean_pred) >= 0)
    assert c.max_deviation < 0.02
    anti = calibration_curve(probs, 1 - labels)
    assert anti.max_deviation > 0.5


def test_calibration_degenerate_and_uniform_bins():
    c = calibration_curve(np.ones(10), np.ones(10))
    assert np.allclose(c.mean_pred, 1.0) and np.allclose(c.frac_pos, 1.0)
    u = calibration_curve([0.01, 0.02, 0.99], [0, 0, 1], nbins=10, strategy="uniform")
    assert u.counts.tolist() == [2, 1]
    with pytest.raises(MissingLabels):
        calibration_curve([0.5], None)


def test_platt_recovers_identity():
    rng = np.random.default_rng(1)
    probs = rng.uniform(0.02, 0.98, 10**4)
    scores = np.log(probs / (1 - probs))
    labels = (rng.random(probs.size) < probs).astype(int)
    prm = platt_fit(scores, labels)
    assert prm.converged
    assert prm.a == pytest.approx(1.0, abs=0.05) and prm.b == pytest.approx(0.0, abs=0.05)


def test_platt_guards():
    with pytest.raises(SingleClass):
        platt_fit([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClass):
        platt_fit([0.3, 0.3, 0.3], [0, 1, 0])


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=50, unique=True))
def test_platt_apply_monotone(scores):
    from eoranking.metrics import PlattParams

    s = np.sort(np.array(scores))
    out = platt_apply(PlattParams(0.7, -0.2), s)
    assert np.all(np.diff(out) >= 0)
