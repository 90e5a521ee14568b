import numpy as np
import pytest

from ttastream.core import l2_normalize, normalize_rows
from ttastream.errors import InvalidM, RankTooLarge, TooFewPrompts
from ttastream.oracles import adjacent_bruteforce, projector_from_jacobi, rank_prompts_bruteforce
from ttastream.textspace import (
    build_adjacent_embeddings,
    compute_text_subspace_projection,
    rank_prompts_by_intra_class_similarity,
)


def random_prompts(rng, c, k, d):
    return normalize_rows(rng.normal(size=(c, k, d)))


# ---- ranking


def test_rank_two_prompts_tie_breaks_by_index():
    prompts = normalize_rows(np.array([[1.0, 0.2], [0.2, 1.0]]))
    order = rank_prompts_by_intra_class_similarity(prompts)
    assert list(order) == [0, 1]  # sim_0 == sim_1, index tie-break


def test_rank_puts_outlier_first():
    near_dup = np.array([1.0, 0.01, 0.0])
    near_dup2 = np.array([1.0, -0.01, 0.0])
    outlier = np.array([0.0, 0.0, 1.0])
    prompts = normalize_rows(np.stack([near_dup, near_dup2, outlier]))
    assert list(rank_prompts_by_intra_class_similarity(prompts)) == [2, 0, 1]


def test_rank_matches_bruteforce_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        prompts = normalize_rows(rng.normal(size=(6, 5)))
        engine = list(rank_prompts_by_intra_class_similarity(prompts))
        assert engine == rank_prompts_bruteforce(prompts)


def test_rank_requires_two_prompts():
    with pytest.raises(TooFewPrompts):
        rank_prompts_by_intra_class_similarity(np.ones((1, 4)))


# ---- progressive binning


def test_pool_sizes_floor_formula():
    # K=7, M=3 -> pools of 2, 4, 7
    rng = np.random.default_rng(0)
    prompts = random_prompts(rng, 1, 7, 5)
    adjacent = build_adjacent_embeddings(prompts, 3)
    order = rank_prompts_by_intra_class_similarity(prompts[0])
    ranked = prompts[0][order]
    for m, q in enumerate((2, 4, 7)):
        np.testing.assert_allclose(adjacent[0, m], l2_normalize(ranked[:q].mean(axis=0)), atol=1e-12)


def test_m_equals_one_collapses_to_global_mean():
    rng = np.random.default_rng(1)
    prompts = random_prompts(rng, 2, 5, 4)
    adjacent = build_adjacent_embeddings(prompts, 1)
    for c in range(2):
        np.testing.assert_allclose(adjacent[c, 0], l2_normalize(prompts[c].mean(axis=0)), atol=1e-12)


def test_invalid_m_rejected():
    rng = np.random.default_rng(2)
    prompts = random_prompts(rng, 1, 4, 3)
    with pytest.raises(InvalidM):
        build_adjacent_embeddings(prompts, 0)
    with pytest.raises(InvalidM):
        build_adjacent_embeddings(prompts, 5)


def test_adjacent_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    prompts = random_prompts(rng, 3, 6, 8)
    engine = build_adjacent_embeddings(prompts, 3)
    np.testing.assert_allclose(engine, adjacent_bruteforce(prompts, 3), atol=1e-9)


def test_final_bin_is_permutation_invariant():
    rng = np.random.default_rng(4)
    prompts = random_prompts(rng, 1, 6, 5)
    shuffled = prompts[:, rng.permutation(6), :]
    a = build_adjacent_embeddings(prompts, 3)
    b = build_adjacent_embeddings(shuffled, 3)
    np.testing.assert_allclose(a[0, -1], b[0, -1], atol=1e-12)


def test_positive_scaling_leaves_bins_unchanged():
    rng = np.random.default_rng(5)
    prompts = random_prompts(rng, 2, 6, 5)
    a = build_adjacent_embeddings(prompts, 3)
    b = build_adjacent_embeddings(prompts * 2.5, 3)
    np.testing.assert_allclose(a, b, atol=1e-12)


# ---- subspace projection


def test_full_rank_projection_is_identity():
    rng = np.random.default_rng(6)
    stacked = rng.normal(size=(12, 8))
    proj = compute_text_subspace_projection(stacked, 8)
    np.testing.assert_allclose(proj.phi, np.eye(8), atol=1e-5)


def test_rank_one_axis_projection():
    stacked = np.tile(np.eye(1, 4), (3, 1))  # rows all e1
    proj = compute_text_subspace_projection(stacked, 1)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    np.testing.assert_allclose(proj.phi, expected, atol=1e-12)
    np.testing.assert_allclose(proj.project(np.array([3.0, 4.0, 0.0, 0.0])), [3, 0, 0, 0], atol=1e-12)


def test_projector_idempotent_symmetric_and_matches_jacobi_oracle():
    rng = np.random.default_rng(7)
    stacked = rng.normal(size=(12, 8))
    proj = compute_text_subspace_projection(stacked, 4)
    phi = proj.phi
    assert np.linalg.norm(phi @ phi - phi) <= 1e-5 * np.linalg.norm(phi)
    assert np.linalg.norm(phi - phi.T) <= 1e-6
    eigvals = np.linalg.eigvalsh(phi)
    assert np.sum(eigvals > 0.5) == 4
    np.testing.assert_allclose(np.sort(eigvals)[-4:], np.ones(4), atol=1e-8)
    np.testing.assert_allclose(phi, projector_from_jacobi(stacked, 4), atol=1e-6)
    z = rng.normal(size=8)
    np.testing.assert_allclose(proj.project(proj.project(z)), proj.project(z), atol=1e-6)


def test_low_rank_reconstruction_matches_jacobi_oracle():
    rng = np.random.default_rng(8)
    stacked = rng.normal(size=(12, 8))
    for n in (1, 3, 4):
        engine = compute_text_subspace_projection(stacked, n).phi
        err_engine = np.linalg.norm(stacked @ engine - stacked)
        err_oracle = np.linalg.norm(stacked @ projector_from_jacobi(stacked, n) - stacked)
        assert err_engine == pytest.approx(err_oracle, abs=1e-6)


def test_rank_too_large_rejected():
    with pytest.raises(RankTooLarge):
        compute_text_subspace_projection(np.eye(3, 5), 4)
