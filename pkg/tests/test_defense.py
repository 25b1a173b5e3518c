"""Benign-majority estimation, temperature weighting, robust aggregation."""

import math

import numpy as np
import pytest

from logitforge.defense import (
    AggregationWeights,
    benign_centroid,
    error_cancellation_audit,
    robust_aggregate,
    temperature_softmax,
    user_class_representatives,
)
from logitforge.errors import (
    MissingClass,
    NonPositiveTemperature,
    ZeroNormRepresentative,
)
from logitforge.logits import LogitBatch, LogitVector


def cohort(n_users=4, n_rows=12, n_classes=3, seed=0, noise=0.1):
    """Aligned batches whose rows are class-peaked plus user noise."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n_rows) % n_classes
    base = np.full((n_rows, n_classes), -1.0)
    base[np.arange(n_rows), labels] = 4.0
    batches = [
        LogitBatch(base + rng.normal(scale=noise, size=base.shape))
        for _ in range(n_users)
    ]
    return batches, labels


class TestUserClassRepresentatives:
    def test_single_user_reduces_to_per_class_mean(self):
        batches, labels = cohort(n_users=1)
        reps = user_class_representatives(batches, labels)
        for class_id in range(3):
            expected = batches[0].rows[labels == class_id].mean(axis=0)
            np.testing.assert_allclose(reps[0][class_id].vector.values, expected, atol=1e-12)

    def test_identical_batches_identical_representatives(self):
        base, labels = cohort(n_users=1)
        batches = [base[0], LogitBatch(base[0].rows.copy())]
        reps = user_class_representatives(batches, labels)
        for class_id in range(3):
            np.testing.assert_array_equal(
                reps[0][class_id].vector.values, reps[1][class_id].vector.values
            )

    def test_matches_naive_summation_oracle(self):
        batches, labels = cohort(n_users=3, seed=5)
        reps = user_class_representatives(batches, labels)
        for k, batch in enumerate(batches):
            for class_id in range(3):
                rows = [
                    batch.rows[i]
                    for i in range(batch.sample_count)
                    if labels[i] == class_id
                ]
                expected = np.array(
                    [sum(r[c] for r in rows) / len(rows) for c in range(3)]
                )
                np.testing.assert_allclose(
                    reps[k][class_id].vector.values, expected, atol=1e-12
                )

    def test_missing_class_rejected(self):
        batches, _ = cohort()
        with pytest.raises(MissingClass):
            user_class_representatives(batches, np.zeros(12, dtype=int))


class TestBenignCentroid:
    def test_all_identical_flags_everyone(self):
        vectors = [LogitVector([1.0, 2.0, 3.0]) for _ in range(5)]
        mean, flags = benign_centroid(vectors, 2)
        np.testing.assert_allclose(mean.values, [1.0, 2.0, 3.0])
        assert flags.all()

    def test_majority_direction_wins(self):
        rng = np.random.default_rng(1)
        up = [LogitVector([1.0, 0.1, 0.0] + rng.normal(scale=0.02, size=3)) for _ in range(7)]
        down = [LogitVector([-1.0, -0.1, 0.0] + rng.normal(scale=0.02, size=3)) for _ in range(3)]
        mean, flags = benign_centroid(up + down, 2)
        assert flags[:7].all()
        assert not flags[7:].any()
        expected = np.mean([v.values for v in up], axis=0)
        np.testing.assert_allclose(mean.values, expected, atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        vectors = [LogitVector(rng.normal(size=4)) for _ in range(6)]
        a = benign_centroid(vectors, 2)
        b = benign_centroid(vectors, 2)
        np.testing.assert_array_equal(a[1], b[1])


class TestTemperatureSoftmax:
    def test_equal_similarities_uniform(self):
        for temperature in (0.1, 1.0, 10.0):
            weights = temperature_softmax(np.full(5, 0.3), temperature)
            np.testing.assert_allclose(weights, 0.2, atol=1e-12)

    def test_hand_computed_pair(self):
        weights = temperature_softmax([1.0, -1.0], 0.5)
        expected_hi = math.exp(2) / (math.exp(2) + math.exp(-2))
        assert weights[0] == pytest.approx(expected_hi, abs=1e-9)
        assert weights[0] == pytest.approx(0.9820, abs=1e-4)
        assert weights[1] == pytest.approx(0.0180, abs=1e-4)

    def test_high_temperature_flattens(self):
        scores = np.array([1.0, 0.0, -1.0])
        spreads = [
            temperature_softmax(scores, t).max() - temperature_softmax(scores, t).min()
            for t in (0.1, 1.0, 10.0)
        ]
        assert spreads[0] > spreads[1] > spreads[2]

    def test_monotone_in_similarity(self):
        base = temperature_softmax([0.2, 0.5, 0.9], 0.5)
        bumped = temperature_softmax([0.4, 0.5, 0.9], 0.5)
        assert bumped[0] > base[0]

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(NonPositiveTemperature):
            temperature_softmax([0.1], 0.0)

    def test_overflow_safe(self):
        weights = temperature_softmax([4000.0, -4000.0], 0.01)
        assert np.isfinite(weights).all()
        np.testing.assert_allclose(weights.sum(), 1.0)


class TestRobustAggregate:
    def test_identical_users_uniform_weights(self):
        batches, labels = cohort(n_users=4, noise=0.0)
        global_batch, weights = robust_aggregate(batches, labels)
        np.testing.assert_allclose(weights.per_user, 0.25, atol=1e-12)
        np.testing.assert_allclose(global_batch.rows, batches[0].rows, atol=1e-12)

    def test_weights_form_probability_vectors(self):
        batches, labels = cohort(n_users=6, seed=3)
        _, weights = robust_aggregate(batches, labels)
        assert np.all(weights.per_class >= 0)
        np.testing.assert_allclose(weights.per_class.sum(axis=0), 1.0, atol=1e-9)
        np.testing.assert_allclose(weights.per_user.sum(), 1.0, atol=1e-9)

    def test_opposed_scaled_attackers_are_downweighted(self):
        rng = np.random.default_rng(4)
        labels = np.arange(12) % 3
        base = np.full((12, 3), -1.0)
        base[np.arange(12), labels] = 4.0
        honest = [
            LogitBatch(base + rng.normal(scale=0.05, size=base.shape)) for _ in range(7)
        ]
        malicious = [LogitBatch(-5.0 * base) for _ in range(3)]
        batches = honest + malicious
        global_batch, weights = robust_aggregate(batches, labels, temperature=0.5)
        normalized = weights.per_user / weights.per_user.sum()
        assert all(normalized[k] < 0.5 * (1.0 / 10.0) for k in range(7, 10))
        honest_mean = np.mean([b.rows for b in honest], axis=0)
        plain_mean = np.mean([b.rows for b in batches], axis=0)
        defended_gap = np.linalg.norm(global_batch.rows.mean(axis=0) - honest_mean.mean(axis=0))
        plain_gap = np.linalg.norm(plain_mean.mean(axis=0) - honest_mean.mean(axis=0))
        assert defended_gap < plain_gap

    def test_huge_temperature_recovers_plain_mean(self):
        batches, labels = cohort(n_users=5, seed=6)
        global_batch, _ = robust_aggregate(batches, labels, temperature=1e6)
        plain = np.mean([b.rows for b in batches], axis=0)
        np.testing.assert_allclose(global_batch.rows, plain, rtol=1e-6, atol=1e-9)

    def test_scale_invariance_of_weights(self):
        batches, labels = cohort(n_users=5, seed=7)
        _, weights = robust_aggregate(batches, labels)
        scaled = [LogitBatch(3.7 * b.rows) for b in batches]
        _, scaled_weights = robust_aggregate(scaled, labels)
        np.testing.assert_allclose(
            scaled_weights.per_class, weights.per_class, atol=1e-9
        )

    def test_determinism(self):
        batches, labels = cohort(n_users=5, seed=8)
        a = robust_aggregate(batches, labels)
        b = robust_aggregate(batches, labels)
        np.testing.assert_array_equal(a[1].per_class, b[1].per_class)

    def test_zero_norm_representative_rejected(self):
        labels = np.arange(4) % 2
        zero_rows = np.zeros((4, 2))
        batches = [LogitBatch(zero_rows + 1e-9)] * 2
        batches = [LogitBatch(np.zeros((4, 2))), LogitBatch(np.ones((4, 2)))]
        with pytest.raises(ZeroNormRepresentative):
            robust_aggregate(batches, labels)

    def test_weight_invariants_enforced(self):
        with pytest.raises(ValueError):
            AggregationWeights(np.array([[0.5], [0.6]]), np.array([0.5, 0.6]), 0.5)


class TestErrorCancellationAudit:
    def test_opposed_cohort_error_suppressed(self):
        rng = np.random.default_rng(9)
        labels = np.arange(15) % 3
        base = np.full((15, 3), -1.0)
        base[np.arange(15), labels] = 4.0
        batches = [
            LogitBatch(base + rng.normal(scale=0.05, size=base.shape)) for _ in range(7)
        ] + [LogitBatch(-5.0 * base) for _ in range(3)]
        flags = [False] * 7 + [True] * 3
        audit = error_cancellation_audit(batches, flags, labels, temperature=0.5)
        assert audit.defended_deviation < 0.1 * audit.undefended_deviation
        assert audit.per_user_similarity.shape == (10, 3)
        assert np.all(np.abs(audit.per_user_similarity) <= 1.0 + 1e-12)

    def test_gap_and_error_term_shapes(self):
        batches, labels = cohort(n_users=4, seed=10)
        audit = error_cancellation_audit(batches, [False, False, False, True], labels)
        assert audit.gap.shape == (3,)
        assert audit.error_term.shape == (3,)
        assert len(audit.benign_mean) == 3

    def test_needs_both_cohorts(self):
        batches, labels = cohort(n_users=3)
        with pytest.raises(ValueError):
            error_cancellation_audit(batches, [False, False, False], labels)
