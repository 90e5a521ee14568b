import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ttastream.consistency import (
    assess_sample,
    committee_pseudo_labels,
    majority_vote,
    reweight_entropy,
    stability_consistency_score,
)
from ttastream.core import normalize_rows
from ttastream.errors import EmptyCommittee, InvalidGamma
from ttastream.oracles import score_oracle, vote_oracle


def axis_committee(c, m, d):
    """Adjacent embeddings where every member of class c is the axis e_c."""
    adjacent = np.zeros((c, m, d))
    for ci in range(c):
        adjacent[ci, :, ci] = 1.0
    return adjacent


# ---- committee labels


def test_committee_separable_case():
    adjacent = axis_committee(2, 4, 3)
    labels = committee_pseudo_labels(np.array([1.0, 0.0, 0.0]), adjacent)
    assert list(labels) == [0, 0, 0, 0]


def test_committee_zero_vector_ties_to_lowest_class():
    adjacent = axis_committee(3, 2, 4)
    labels = committee_pseudo_labels(np.zeros(4), adjacent)
    assert list(labels) == [0, 0]


def test_committee_matches_bruteforce_dot_products():
    rng = np.random.default_rng(11)
    for _ in range(25):
        adjacent = normalize_rows(rng.normal(size=(4, 3, 6)))
        z = rng.normal(size=6)
        engine = committee_pseudo_labels(z, adjacent)
        expected = [
            max(range(4), key=lambda c: (float(z @ adjacent[c, m]), -c)) for m in range(3)
        ]
        assert list(engine) == expected


def test_committee_invariant_to_positive_scaling():
    rng = np.random.default_rng(12)
    adjacent = normalize_rows(rng.normal(size=(5, 3, 6)))
    z = rng.normal(size=6)
    assert list(committee_pseudo_labels(z, adjacent)) == list(
        committee_pseudo_labels(3.7 * z, adjacent)
    )


# ---- majority vote


def test_majority_strict():
    assert majority_vote(np.array([0, 0, 1]), original=2) == (0, 2)


def test_majority_tie_prefers_original():
    assert majority_vote(np.array([0, 1]), original=1) == (1, 1)
    assert majority_vote(np.array([0, 1]), original=2) == (0, 1)  # original not tied


def test_majority_empty_raises():
    with pytest.raises(EmptyCommittee):
        majority_vote(np.array([], dtype=int), original=0)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=7), st.integers(0, 4))
def test_majority_matches_counting_oracle(labels, original):
    assert majority_vote(np.array(labels), original) == vote_oracle(labels, original)


# ---- stability-consistency score


def test_perfect_agreement_scores_exactly_one():
    r, s, w = stability_consistency_score(2, 3, 3, 2, gamma=2.0)
    assert (r, s) == (1.0, 1.0)
    assert w == 1.0  # exact: ln(1) == 0


def test_worst_case_three_way_split():
    # labels (a, b, c), original not the tie winner: R = gamma, S = 3
    r, s, w = stability_consistency_score(0, 1, 3, 2, gamma=2.0)
    assert (r, s) == (2.0, 3.0)
    assert w == pytest.approx(1.0 + math.log(6.0), abs=1e-12)


def test_gamma_below_one_rejected():
    with pytest.raises(InvalidGamma):
        stability_consistency_score(0, 1, 3, 0, gamma=0.5)


def test_exhaustive_27_tuples_match_closed_form():
    for labels in itertools.product(range(3), repeat=3):
        for original in range(3):
            winner, count = majority_vote(np.array(labels), original)
            _, _, w = stability_consistency_score(winner, count, 3, original, gamma=2.0)
            assert w == score_oracle(list(labels), original, 2.0)  # bitwise identical


def test_assess_sample_end_to_end_gate():
    adjacent = axis_committee(3, 3, 3)
    verdict = assess_sample(np.array([1.0, 0.1, 0.0]), adjacent, original_label=0, gamma=2.0)
    assert verdict.score == 1.0 and verdict.majority_label == 0
    verdict = assess_sample(np.array([1.0, 0.1, 0.0]), adjacent, original_label=1, gamma=2.0)
    assert verdict.consistency == 2.0 and verdict.score > 1.0


def test_single_member_committee():
    # M = 1: stability is always perfect; only projection disagreement penalizes
    adjacent = axis_committee(2, 1, 3)
    agree = assess_sample(np.array([1.0, 0.0, 0.0]), adjacent, original_label=0, gamma=2.0)
    assert agree.stability == 1.0 and agree.score == 1.0
    disagree = assess_sample(np.array([1.0, 0.0, 0.0]), adjacent, original_label=1, gamma=2.0)
    assert disagree.stability == 1.0
    assert disagree.score == pytest.approx(1.0 + math.log(2.0), abs=1e-12)


# ---- reweighting


def test_reweight_identity_and_absorbing_zero():
    assert reweight_entropy(0.37, 1.0) == 0.37
    assert reweight_entropy(0.0, 5.0) == 0.0


def test_reweight_forced_arithmetic():
    assert reweight_entropy(0.5, 1.0 + math.log(2.0)) == pytest.approx(0.8465735903, abs=1e-9)


def test_score_monotone_in_consistency_and_stability():
    # fixed H: raising R (via a disagreement) or S (via a smaller majority)
    # never lowers the reweighted entropy
    h = 0.3
    base = reweight_entropy(h, stability_consistency_score(0, 3, 3, 0, gamma=2.0)[2])
    worse_r = reweight_entropy(h, stability_consistency_score(0, 3, 3, 1, gamma=2.0)[2])
    worse_s = reweight_entropy(h, stability_consistency_score(0, 2, 3, 0, gamma=2.0)[2])
    worst = reweight_entropy(h, stability_consistency_score(0, 1, 3, 1, gamma=2.0)[2])
    assert base < worse_r and base < worse_s
    assert worse_r < worst and worse_s < worst


@given(
    st.integers(1, 6),
    st.lists(st.integers(0, 3), min_size=1, max_size=6),
    st.integers(0, 3),
    st.floats(1.0, 5.0),
)
def test_score_at_least_one_and_gate_characterization(m_unused, labels, original, gamma):
    winner, count = majority_vote(np.array(labels), original)
    r, s, w = stability_consistency_score(winner, count, len(labels), original, gamma)
    assert w >= 1.0 - 1e-12
    unanimous_and_consistent = len(set(labels)) == 1 and labels[0] == original
    if gamma > 1.0:
        assert (w == 1.0) == unanimous_and_consistent
    # monotonicity: inflating R or S never lowers the reweighted entropy
    h = 0.42
    assert reweight_entropy(h, w) >= h - 1e-12
