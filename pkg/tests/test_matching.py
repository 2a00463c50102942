import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimatch import (
    FeatureMap,
    InvalidArgumentError,
    MatchMode,
    ProbMask,
    SimMatrix,
    mask_weighted_scores,
    match,
    reduce_query_max,
    similarity_matrix,
    topk_filter,
)

from .conftest import random_features, random_hard_mask, random_soft_mask
from .oracles import naive_full_match, naive_topk_rows


def _sim_from(data: np.ndarray, query_h=None, query_w=None) -> SimMatrix:
    rows, cols = data.shape
    qh = query_h if query_h is not None else 1
    qw = query_w if query_w is not None else cols
    return SimMatrix(data.astype(np.float32), ref_h=rows, ref_w=1, query_h=qh, query_w=qw)


class TestSimilarityMatrix:
    def test_identical_unit_vectors(self):
        ref = FeatureMap(np.array([[[0.6]], [[0.8]]], dtype=np.float32))
        s = similarity_matrix(ref, ref)
        assert s.data[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_opposite_vectors(self):
        ref = FeatureMap(np.array([[[1.0]], [[0.0]]], dtype=np.float32))
        qry = FeatureMap(np.array([[[-1.0]], [[0.0]]], dtype=np.float32))
        assert similarity_matrix(ref, qry).data[0, 0] == pytest.approx(0.0, abs=1e-6)

    def test_orthogonal_vectors(self):
        ref = FeatureMap(np.array([[[1.0]], [[0.0]]], dtype=np.float32))
        qry = FeatureMap(np.array([[[0.0]], [[1.0]]], dtype=np.float32))
        assert similarity_matrix(ref, qry).data[0, 0] == pytest.approx(0.5, abs=1e-6)

    def test_zero_vector_is_neutral(self):
        ref = FeatureMap(np.zeros((3, 1, 1), dtype=np.float32))
        qry = FeatureMap(np.ones((3, 1, 1), dtype=np.float32))
        assert similarity_matrix(ref, qry).data[0, 0] == 0.5

    def test_channel_mismatch(self, rng):
        with pytest.raises(InvalidArgumentError):
            similarity_matrix(random_features(rng, 4, 2, 2), random_features(rng, 5, 2, 2))

    def test_bounded(self, rng):
        s = similarity_matrix(random_features(rng, 16, 5, 4), random_features(rng, 16, 3, 6))
        assert s.data.min() >= -1e-6 and s.data.max() <= 1.0 + 1e-6
        assert s.data.shape == (20, 18)


class TestTopkFilter:
    def test_single_row_k1(self):
        s = _sim_from(np.array([[0.9, 0.2, 0.5]]))
        out = topk_filter(s, 1)
        expected = naive_topk_rows(s.data, 1)
        assert np.array_equal(out.data, np.array([[0.9, 0.2, 0.2]], dtype=np.float32))
        assert np.array_equal(out.data, expected)

    def test_infinity_returns_input_unchanged(self):
        s = _sim_from(np.array([[0.9, 0.2, 0.5]]))
        assert topk_filter(s, math.inf) is s

    def test_k_at_least_query_size_unchanged(self):
        s = _sim_from(np.array([[0.9, 0.2, 0.5]]))
        assert topk_filter(s, 3) is s
        assert topk_filter(s, 7) is s

    def test_tie_broken_to_lowest_query_index(self):
        s = _sim_from(np.array([[0.7, 0.7, 0.1]]))
        out = topk_filter(s, 1)
        expected = naive_topk_rows(s.data, 1)
        assert np.array_equal(out.data, np.array([[0.7, 0.1, 0.1]], dtype=np.float32))
        assert np.array_equal(out.data, expected)

    def test_k_below_one_rejected(self):
        s = _sim_from(np.array([[0.9, 0.2, 0.5]]))
        with pytest.raises(InvalidArgumentError):
            topk_filter(s, 0)
        with pytest.raises(InvalidArgumentError):
            topk_filter(s, -3)

    def test_matches_oracle_on_random_matrices(self, rng):
        for k in (1, 2, 3, 5):
            data = rng.random((6, 8)).astype(np.float32)
            s = SimMatrix(data, ref_h=2, ref_w=3, query_h=2, query_w=4)
            assert np.array_equal(topk_filter(s, k).data, naive_topk_rows(data, k))

    def test_ties_with_duplicates_match_oracle(self):
        data = np.array(
            [[0.5, 0.5, 0.5, 0.5], [0.3, 0.8, 0.8, 0.3], [0.1, 0.9, 0.1, 0.9]],
            dtype=np.float32,
        )
        s = SimMatrix(data, ref_h=3, ref_w=1, query_h=1, query_w=4)
        for k in (1, 2, 3):
            assert np.array_equal(topk_filter(s, k).data, naive_topk_rows(data, k))


class TestMaskWeightedScores:
    def test_full_foreground(self, rng):
        s = similarity_matrix(random_features(rng, 4, 2, 2), random_features(rng, 4, 2, 2))
        mask = ProbMask.from_fg(np.ones((2, 2)))
        s_bg, s_fg = mask_weighted_scores(s, mask)
        assert np.array_equal(s_fg.data, s.data)
        assert np.array_equal(s_bg.data, np.zeros_like(s.data))

    def test_half_mass_scales(self, rng):
        s = similarity_matrix(random_features(rng, 4, 2, 2), random_features(rng, 4, 2, 2))
        mask = ProbMask.from_fg(np.full((2, 2), 0.5))
        _, s_fg = mask_weighted_scores(s, mask)
        assert np.allclose(s_fg.data, 0.5 * s.data, atol=1e-7)

    def test_elementwise_oracle(self, rng):
        data = rng.random((6, 5)).astype(np.float32)
        s = SimMatrix(data, ref_h=3, ref_w=2, query_h=5, query_w=1)
        mask = random_soft_mask(rng, 3, 2)
        s_bg, s_fg = mask_weighted_scores(s, mask)
        w_bg = mask.bg.reshape(-1).astype(np.float32)
        w_fg = mask.fg.reshape(-1).astype(np.float32)
        for p in range(6):
            for q in range(5):
                assert s_bg.data[p, q] == data[p, q] * w_bg[p]
                assert s_fg.data[p, q] == data[p, q] * w_fg[p]

    def test_dimension_mismatch(self, rng):
        s = similarity_matrix(random_features(rng, 4, 2, 2), random_features(rng, 4, 2, 2))
        with pytest.raises(InvalidArgumentError):
            mask_weighted_scores(s, random_soft_mask(rng, 3, 2))


class TestReduceQueryMax:
    def test_two_element_column(self):
        bg = _sim_from(np.array([[0.1], [0.3]]), query_h=1, query_w=1)
        fg = _sim_from(np.array([[0.2], [0.7]]), query_h=1, query_w=1)
        pair = reduce_query_max(bg, fg)
        assert pair.y_fg[0, 0] == np.float32(0.7)
        assert pair.y_bg[0, 0] == np.float32(0.3)

    def test_all_zero(self):
        z = _sim_from(np.zeros((3, 4)))
        pair = reduce_query_max(z, z)
        assert np.array_equal(pair.y_bg, np.zeros((1, 4), dtype=np.float32))

    def test_column_max_oracle(self, rng):
        a = rng.random((7, 6)).astype(np.float32)
        b = rng.random((7, 6)).astype(np.float32)
        sa = SimMatrix(a, ref_h=7, ref_w=1, query_h=2, query_w=3)
        sb = SimMatrix(b, ref_h=7, ref_w=1, query_h=2, query_w=3)
        pair = reduce_query_max(sa, sb)
        assert np.array_equal(pair.y_bg.reshape(-1), a.max(axis=0))
        assert np.array_equal(pair.y_fg.reshape(-1), b.max(axis=0))

    def test_shape_mismatch(self, rng):
        a = _sim_from(rng.random((3, 4)))
        b = _sim_from(rng.random((3, 5)))
        with pytest.raises(InvalidArgumentError):
            reduce_query_max(a, b)


class TestMatch:
    def test_surjective_equals_bijective_infinite_k(self, rng):
        for _ in range(100):
            c = int(rng.integers(1, 9))
            rh, rw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            qh, qw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            ref = random_features(rng, c, rh, rw)
            qry = random_features(rng, c, qh, qw)
            mask = random_soft_mask(rng, rh, rw)
            a = match(ref, qry, mask, MatchMode.surjective())
            b = match(ref, qry, mask, MatchMode.bijective(math.inf))
            assert np.array_equal(a.y_bg, b.y_bg) and np.array_equal(a.y_fg, b.y_fg)

    def test_distractor_suppression_case(self):
        # Reference: one foreground pixel u, one background pixel v (orthogonal).
        # Query: three pixels with cosine 1.0, 0.98, -0.8 against u, giving
        # similarities 1.0, 0.99, 0.1 on the foreground row.
        u = np.array([1.0, 0.0])
        v = np.array([0.0, 1.0])
        theta = 0.98
        q2 = np.array([theta, np.sqrt(1 - theta**2)])
        q3 = np.array([-0.8, 0.6])
        ref = FeatureMap(np.stack([u, v], axis=1)[:, :, None].astype(np.float32))
        qry = FeatureMap(np.stack([u, q2, q3], axis=1)[:, :, None].astype(np.float32))
        mask = ProbMask.from_fg(np.array([[1.0], [0.0]]))

        surj = match(ref, qry, mask, MatchMode.surjective())
        assert np.allclose(surj.y_fg.reshape(-1), [1.0, 0.99, 0.1], atol=1e-6)

        bij = match(ref, qry, mask, MatchMode.bijective(1))
        assert np.allclose(bij.y_fg.reshape(-1), [1.0, 0.1, 0.1], atol=1e-6)

        # both agree exactly with the literal pipeline oracle
        for mode, result in ((math.inf, surj), (1, bij)):
            _, ofg = naive_full_match(ref.data, qry.data, mask.bg, mask.fg, mode)
            assert np.array_equal(result.y_fg.reshape(-1), ofg)

    def test_self_match_k1_foreground_is_one(self, rng):
        feats = random_features(rng, 8, 4, 4)
        mask = random_hard_mask(rng, 4, 4)
        result = match(feats, feats, mask, MatchMode.bijective(1))
        fg_pixels = mask.fg.astype(bool)
        assert np.all(result.y_fg[fg_pixels] == np.float32(1.0))

    def test_oracle_equivalence_small_grids(self, rng):
        for _ in range(25):
            c = int(rng.integers(1, 9))
            rh, rw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            qh, qw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            ref = random_features(rng, c, rh, rw)
            qry = random_features(rng, c, qh, qw)
            mask = random_soft_mask(rng, rh, rw)
            k = [1, 2, 3, math.inf][int(rng.integers(0, 4))]
            mode = MatchMode.surjective() if math.isinf(k) else MatchMode.bijective(k)
            got = match(ref, qry, mask, mode)
            obg, ofg = naive_full_match(ref.data, qry.data, mask.bg, mask.fg, k)
            assert np.array_equal(got.y_bg.reshape(-1), obg)
            assert np.array_equal(got.y_fg.reshape(-1), ofg)

    def test_monotone_in_k(self, rng):
        ref = random_features(rng, 8, 5, 5)
        qry = random_features(rng, 8, 5, 5)
        mask = random_soft_mask(rng, 5, 5)
        previous = None
        for k in (1, 2, 4, 8, 16):
            result = match(ref, qry, mask, MatchMode.bijective(k))
            if previous is not None:
                assert np.all(result.y_fg >= previous.y_fg)
            previous = result

    def test_permutation_equivariance(self, rng):
        ref = random_features(rng, 6, 3, 3)
        qry = random_features(rng, 6, 2, 6)
        mask = random_soft_mask(rng, 3, 3)
        base = match(ref, qry, mask, MatchMode.bijective(3))
        perm = rng.permutation(12)
        qdata = qry.data.reshape(6, -1)[:, perm].reshape(6, 2, 6)
        permuted = match(ref, FeatureMap(qdata), mask, MatchMode.bijective(3))
        assert np.array_equal(permuted.y_fg.reshape(-1), base.y_fg.reshape(-1)[perm])
        assert np.array_equal(permuted.y_bg.reshape(-1), base.y_bg.reshape(-1)[perm])

    def test_outputs_bounded(self, rng):
        for _ in range(20):
            ref = random_features(rng, 4, 3, 3)
            qry = random_features(rng, 4, 3, 3)
            mask = random_soft_mask(rng, 3, 3)
            result = match(ref, qry, mask, MatchMode.bijective(2))
            for plane in (result.y_bg, result.y_fg):
                assert plane.min() >= -1e-6 and plane.max() <= 1.0 + 1e-6


class TestMatchMode:
    def test_bijective_requires_valid_k(self):
        with pytest.raises(InvalidArgumentError):
            MatchMode.bijective(0)
        with pytest.raises(InvalidArgumentError):
            MatchMode.bijective(2.5)

    def test_from_k(self):
        assert MatchMode.from_k(math.inf).kind == "surjective"
        assert MatchMode.from_k(4).kind == "bijective"

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            MatchMode(kind="sideways")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_boundedness_property(seed, k):
    rng = np.random.default_rng(seed)
    ref = random_features(rng, 3, 2, 3)
    qry = random_features(rng, 3, 3, 2)
    mask = random_soft_mask(rng, 2, 3)
    s = similarity_matrix(ref, qry)
    filtered = topk_filter(s, k)
    s_bg, s_fg = mask_weighted_scores(filtered, mask)
    pair = reduce_query_max(s_bg, s_fg)
    for arr in (s.data, filtered.data, s_bg.data, s_fg.data, pair.y_bg, pair.y_fg):
        assert arr.min() >= -1e-6 and arr.max() <= 1.0 + 1e-6
