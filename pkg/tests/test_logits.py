"""Logit types, representative averaging, relevance matrices, and scores."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logitforge.errors import DimensionMismatch, NoSamplesForClass
from logitforge.logits import (
    DistanceMatrix,
    LogitBatch,
    LogitVector,
    argmax_index,
    relevance_matrix,
    representative_vector,
    score_s1,
    score_s2,
)


def naive_relevance(values):
    """Independent double-loop evaluation of the distance-matrix rule."""
    n = len(values)
    out = np.zeros((n, n))
    for i in range(n):
        denom = sum(abs(values[i] - values[k]) for k in range(n))
        if denom == 0:
            continue
        for j in range(n):
            if i != j:
                out[i, j] = abs(values[i] - values[j]) / denom
    return out


class TestTypes:
    def test_vector_rejects_nan(self):
        with pytest.raises(ValueError):
            LogitVector([1.0, np.nan])

    def test_vector_needs_two_classes(self):
        with pytest.raises(DimensionMismatch):
            LogitVector([1.0])

    def test_batch_rows_immutable(self):
        batch = LogitBatch([[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            batch.rows[0, 0] = 9.0

    def test_distance_matrix_validates_row_sums(self):
        with pytest.raises(ValueError):
            DistanceMatrix([[0.0, 0.4], [0.5, 0.0]])

    def test_distance_matrix_requires_zero_diagonal(self):
        with pytest.raises(ValueError):
            DistanceMatrix([[0.1, 0.9], [1.0, 0.0]])


class TestRepresentativeVector:
    def test_single_row(self):
        batch = LogitBatch([[0.5, -1.0]])
        rep = representative_vector(batch, [3], 3)
        np.testing.assert_array_equal(rep.vector.values, [0.5, -1.0])
        assert rep.sample_count == 1

    def test_symmetric_pair(self):
        batch = LogitBatch([[0.0, 2.0], [2.0, 0.0]])
        rep = representative_vector(batch, [1, 1], 1)
        np.testing.assert_array_equal(rep.vector.values, [1.0, 1.0])
        assert rep.sample_count == 2

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(7)
        rows = rng.normal(size=(100, 10))
        batch = LogitBatch(rows)
        labels = np.zeros(100, dtype=int)
        rep = representative_vector(batch, labels, 0)
        # Naive summation oracle, one component at a time.
        expected = np.array([sum(rows[i, c] for i in range(100)) / 100.0 for c in range(10)])
        np.testing.assert_allclose(rep.vector.values, expected, atol=1e-12)

    def test_missing_class(self):
        batch = LogitBatch([[1.0, 2.0]])
        with pytest.raises(NoSamplesForClass):
            representative_vector(batch, [0], 1)

    def test_label_length_checked(self):
        batch = LogitBatch([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(DimensionMismatch):
            representative_vector(batch, [0], 0)


class TestRelevanceMatrix:
    def test_hand_computed_three_classes(self):
        matrix = relevance_matrix(LogitVector([1.0, 2.0, 3.0]))
        expected = np.array(
            [
                [0.0, 1.0 / 3.0, 2.0 / 3.0],
                [0.5, 0.0, 0.5],
                [2.0 / 3.0, 1.0 / 3.0, 0.0],
            ]
        )
        np.testing.assert_allclose(matrix.entries, expected, atol=1e-12)
        assert not matrix.degenerate

    def test_two_distinct_values(self):
        matrix = relevance_matrix(LogitVector([4.0, -1.0]))
        np.testing.assert_allclose(matrix.entries, [[0.0, 1.0], [1.0, 0.0]])

    def test_constant_vector_degenerates(self):
        matrix = relevance_matrix(LogitVector([5.0, 5.0, 5.0]))
        np.testing.assert_array_equal(matrix.entries, np.zeros((3, 3)))
        assert matrix.degenerate

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=12)
        matrix = relevance_matrix(LogitVector(values))
        np.testing.assert_allclose(matrix.entries, naive_relevance(values), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-50, 50), min_size=3, max_size=12),
        st.floats(0.1, 100.0),
        st.floats(-20.0, 20.0),
    )
    def test_scale_and_shift_invariance(self, values, scale, shift):
        base = np.asarray(values)
        original = relevance_matrix(LogitVector(base))
        transformed = relevance_matrix(LogitVector(scale * base + shift))
        np.testing.assert_allclose(transformed.entries, original.entries, atol=1e-9)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            matrix = relevance_matrix(LogitVector(rng.normal(size=10)))
            np.testing.assert_allclose(matrix.entries.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(np.diag(matrix.entries) == 0.0)


class TestScoreS1:
    def test_identity_is_zero(self):
        v = LogitVector([0.5, -2.0, 1.5, 3.0])
        assert score_s1(v, v) == 0.0

    def test_reversal_of_equispaced_vector_is_invisible(self):
        # Reversing (1,2,3) preserves the entire distance matrix, so a
        # negation-style attack can leave this score at zero.
        assert score_s1(LogitVector([1.0, 2.0, 3.0]), LogitVector([3.0, 2.0, 1.0])) == pytest.approx(0.0, abs=1e-12)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=10)
        b = rng.normal(size=10)
        expected = np.abs(naive_relevance(a) - naive_relevance(b)).sum()
        got = score_s1(LogitVector(a), LogitVector(b))
        assert got == pytest.approx(expected, abs=1e-9)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            a = LogitVector(rng.normal(size=8))
            b = LogitVector(rng.normal(size=8))
            assert score_s1(a, b) == pytest.approx(score_s1(b, a), abs=1e-12)
            assert score_s1(a, b) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            score_s1(LogitVector([1.0, 2.0]), LogitVector([1.0, 2.0, 3.0]))

    def test_pure_scaling_invisible(self):
        rng = np.random.default_rng(17)
        v = rng.normal(size=10)
        assert score_s1(LogitVector(v), LogitVector(4.2 * v)) == pytest.approx(0.0, abs=1e-9)


class TestArgmax:
    def test_plain(self):
        assert argmax_index(LogitVector([0.1, 0.9, 0.3])) == 1

    def test_tie_breaks_low(self):
        assert argmax_index(LogitVector([2.0, 2.0, 1.0])) == 0

    def test_all_negative(self):
        assert argmax_index(LogitVector([-3.0, -1.0, -2.0])) == 1


class TestScoreS2:
    def test_identical_vectors(self):
        v = LogitVector([1.0, 5.0, 2.0])
        assert score_s2(v, v) == 0.0

    def test_hand_computed_reversal(self):
        got = score_s2(LogitVector([1.0, 2.0, 3.0]), LogitVector([3.0, 2.0, 1.0]))
        assert got == pytest.approx(4.0 / 3.0, abs=1e-12)

    def test_scaling_amplifies(self):
        got = score_s2(LogitVector([1.0, 2.0, 3.0]), LogitVector([6.0, 4.0, 2.0]))
        assert got == pytest.approx(10.0 / 3.0, abs=1e-12)

    def test_zero_when_argmax_unchanged(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            v = rng.normal(size=10)
            jitter = rng.normal(scale=1e-3, size=10)
            poisoned = v + jitter
            if np.argmax(v) == np.argmax(poisoned):
                assert score_s2(LogitVector(v), LogitVector(poisoned)) == 0.0

    def test_pure_scaling_invisible(self):
        rng = np.random.default_rng(29)
        v = rng.normal(size=10)
        assert score_s2(LogitVector(v), LogitVector(3.7 * v)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            score_s2(LogitVector([1.0, 2.0]), LogitVector([1.0, 2.0, 3.0]))
