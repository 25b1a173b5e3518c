"""Classifier training, losses, gradients, and checkpoint serialization."""

import math

import numpy as np
import pytest

from logitforge.data import gen_synthetic
from logitforge.errors import (
    BadMagic,
    DimensionMismatch,
    EmptyDataset,
    InvalidDistribution,
    TruncatedFile,
)
from logitforge.logits import LogitBatch
from logitforge.model import (
    Classifier,
    LossKind,
    TrainConfig,
    _batch_objective,
    distill,
    evaluate,
    init_classifier,
    load_checkpoint,
    loss_value,
    predict_logits,
    save_checkpoint,
    softmax_rows,
    train_supervised,
)


def flatten_params(clf):
    return np.concatenate([clf.w1.ravel(), clf.b1.ravel(), clf.w2.ravel(), clf.b2.ravel()])


def with_flat_params(clf, flat):
    d, h, c = clf.layer_dims
    w1 = flat[: d * h].reshape(d, h)
    b1 = flat[d * h : d * h + h]
    w2 = flat[d * h + h : d * h + h + h * c].reshape(h, c)
    b2 = flat[d * h + h + h * c :]
    return Classifier(w1, b1, w2, b2, clf.layer_dims, clf.rng_seed)


def numerical_gradient(clf, X, targets, kind, step=1e-5):
    flat = flatten_params(clf)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        plus = flat.copy()
        plus[i] += step
        minus = flat.copy()
        minus[i] -= step
        loss_plus, _ = _batch_objective(with_flat_params(clf, plus), X, targets, kind)
        loss_minus, _ = _batch_objective(with_flat_params(clf, minus), X, targets, kind)
        grad[i] = (loss_plus - loss_minus) / (2 * step)
    return grad


def toy_classifier(seed=0):
    """10-parameter network: 1 input, 2 hidden units, 2 classes."""
    rng = np.random.default_rng(seed)
    return Classifier(
        w1=rng.normal(size=(1, 2)),
        b1=rng.normal(size=2),
        w2=rng.normal(size=(2, 2)),
        b2=rng.normal(size=2),
        layer_dims=(1, 2, 2),
        rng_seed=seed,
    )


class TestPredict:
    def test_zero_network_outputs_zeros(self):
        clf = Classifier(
            np.zeros((3, 2)), np.zeros(2), np.zeros((2, 2)), np.zeros(2), (3, 2, 2), 0
        )
        batch = predict_logits(clf, np.ones((4, 3)))
        np.testing.assert_array_equal(batch.rows, np.zeros((4, 2)))

    def test_hand_computed_affine(self):
        clf = Classifier(
            w1=np.eye(2),
            b1=np.array([0.5, 0.5]),
            w2=np.array([[2.0, -1.0], [0.0, 1.0]]),
            b2=np.array([0.1, -0.2]),
            layer_dims=(2, 2, 2),
            rng_seed=0,
        )
        batch = predict_logits(clf, np.array([[1.0, 2.0]]))
        # hidden = relu((1,2) + (0.5,0.5)) = (1.5, 2.5)
        # output = (1.5*2 + 0.1, -1.5 + 2.5 - 0.2) = (3.1, 0.8)
        np.testing.assert_allclose(batch.rows[0], [3.1, 0.8], atol=1e-12)

    def test_batch_consistency(self):
        clf = init_classifier(5, 4, 3, seed=7)
        X = np.random.default_rng(1).uniform(size=(6, 5))
        stacked = predict_logits(clf, X).rows
        for i in range(6):
            single = predict_logits(clf, X[i : i + 1]).rows[0]
            # BLAS picks different kernels for matrix and vector products,
            # so agreement is to rounding, not bitwise.
            np.testing.assert_allclose(stacked[i], single, rtol=1e-12, atol=1e-12)

    def test_pure_function(self):
        clf = init_classifier(4, 3, 2, seed=3)
        X = np.random.default_rng(2).uniform(size=(5, 4))
        np.testing.assert_array_equal(predict_logits(clf, X).rows, predict_logits(clf, X).rows)

    def test_dimension_mismatch(self):
        clf = init_classifier(4, 3, 2, seed=3)
        with pytest.raises(DimensionMismatch):
            predict_logits(clf, np.ones((2, 5)))


class TestTrainSupervised:
    def test_empty_dataset(self):
        clf = init_classifier(2, 3, 2, seed=0)
        cfg = TrainConfig(1, 0.1, 8, LossKind.CROSS_ENTROPY)
        with pytest.raises(EmptyDataset):
            train_supervised(clf, np.zeros((0, 2)), np.zeros(0, dtype=int), cfg)

    def test_separable_blobs_reach_high_accuracy(self):
        data = gen_synthetic(2, 60, 2, spread=0.05, seed=5)
        clf = init_classifier(2, 8, 2, seed=11)
        cfg = TrainConfig(50, 0.5, 16, LossKind.CROSS_ENTROPY)
        trained = train_supervised(clf, data.features, data.labels, cfg)
        accuracy, _ = evaluate(trained, data.features, data.labels)
        assert accuracy >= 0.95

    def test_bitwise_determinism(self):
        data = gen_synthetic(3, 20, 4, spread=0.1, seed=8)
        cfg = TrainConfig(3, 0.2, 8, LossKind.CROSS_ENTROPY)
        a = train_supervised(init_classifier(4, 5, 3, seed=2), data.features, data.labels, cfg)
        b = train_supervised(init_classifier(4, 5, 3, seed=2), data.features, data.labels, cfg)
        for name in ("w1", "b1", "w2", "b2"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_input_classifier_untouched(self):
        data = gen_synthetic(2, 20, 3, spread=0.1, seed=4)
        clf = init_classifier(3, 4, 2, seed=6)
        before = flatten_params(clf).copy()
        cfg = TrainConfig(2, 0.3, 8, LossKind.CROSS_ENTROPY)
        train_supervised(clf, data.features, data.labels, cfg)
        np.testing.assert_array_equal(flatten_params(clf), before)

    def test_full_batch_loss_non_increasing_early(self):
        data = gen_synthetic(2, 30, 3, spread=0.2, seed=9)
        clf = init_classifier(3, 4, 2, seed=1)
        cfg = TrainConfig(1, 1e-3, 60, LossKind.CROSS_ENTROPY)
        losses = []
        current = clf
        for _ in range(6):
            loss, _ = _batch_objective(current, data.features, data.labels, LossKind.CROSS_ENTROPY)
            losses.append(loss)
            current = train_supervised(current, data.features, data.labels, cfg)
        for a, b in zip(losses, losses[1:]):
            assert b <= a + 1e-12


class TestDistill:
    def test_perfect_fit_is_fixed_point(self):
        clf = init_classifier(3, 4, 2, seed=13)
        X = np.random.default_rng(3).uniform(size=(10, 3))
        targets = predict_logits(clf, X)
        cfg = TrainConfig(1, 0.5, 4, LossKind.MAE)
        after = distill(clf, X, targets, cfg)
        # sign(0) = 0, so the gradient vanishes and parameters stay put.
        np.testing.assert_array_equal(flatten_params(after), flatten_params(clf))

    def test_kl_identical_distributions_zero(self):
        p = np.array([[0.3, 0.7], [0.5, 0.5]])
        assert loss_value(LossKind.KL, p, p) == pytest.approx(0.0, abs=1e-12)

    def test_distill_moves_toward_targets(self):
        clf = init_classifier(2, 6, 3, seed=17)
        X = np.random.default_rng(5).uniform(size=(12, 2))
        target_rows = np.tile([2.0, -1.0, 0.5], (12, 1))
        targets = LogitBatch(target_rows)
        before, _ = _batch_objective(clf, X, target_rows, LossKind.MAE)
        cfg = TrainConfig(30, 0.05, 4, LossKind.MAE)
        after_clf = distill(clf, X, targets, cfg)
        after, _ = _batch_objective(after_clf, X, target_rows, LossKind.MAE)
        assert after < before

    def test_rejects_cross_entropy(self):
        clf = init_classifier(2, 2, 2, seed=0)
        cfg = TrainConfig(1, 0.1, 4, LossKind.CROSS_ENTROPY)
        with pytest.raises(ValueError):
            distill(clf, np.ones((2, 2)), LogitBatch(np.ones((2, 2))), cfg)


class TestLossValue:
    def test_cross_entropy_perfect_prediction(self):
        predictions = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert loss_value(LossKind.CROSS_ENTROPY, predictions, [0, 1]) == pytest.approx(0.0, abs=1e-9)

    def test_mae_identical(self):
        rows = np.random.default_rng(6).normal(size=(4, 3))
        assert loss_value(LossKind.MAE, rows, rows) == 0.0

    def test_mae_hand_value(self):
        assert loss_value(LossKind.MAE, [[0.0, 0.0]], [[1.0, 2.0]]) == pytest.approx(1.5)

    def test_kl_hand_value(self):
        expected = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
        got = loss_value(LossKind.KL, [[0.25, 0.75]], [[0.5, 0.5]])
        assert got == pytest.approx(expected, abs=1e-9)
        assert got == pytest.approx(0.14384, abs=1e-5)

    def test_kl_rejects_non_distribution(self):
        with pytest.raises(InvalidDistribution):
            loss_value(LossKind.KL, [[0.5, 0.6]], [[0.5, 0.5]])
        with pytest.raises(InvalidDistribution):
            loss_value(LossKind.KL, [[0.5, 0.5]], [[-0.2, 1.2]])


class TestGradients:
    def test_gradients_match_finite_differences(self):
        clf = toy_classifier(seed=31)
        rng = np.random.default_rng(7)
        X = rng.uniform(-1, 1, size=(6, 1))
        cases = {
            LossKind.CROSS_ENTROPY: rng.integers(0, 2, size=6),
            LossKind.MAE: rng.normal(size=(6, 2)),
            LossKind.KL: rng.normal(size=(6, 2)),
        }
        for kind, targets in cases.items():
            _, grads = _batch_objective(clf, X, targets, kind)
            analytic = np.concatenate(
                [grads["w1"].ravel(), grads["b1"].ravel(), grads["w2"].ravel(), grads["b2"].ravel()]
            )
            numeric = numerical_gradient(clf, X, targets, kind)
            scale = np.maximum(np.abs(numeric), 1e-8)
            rel = np.abs(analytic - numeric) / scale
            # Ignore coordinates where both are essentially zero.
            active = np.abs(numeric) > 1e-10
            assert np.all(rel[active] < 1e-4), f"{kind}: max rel err {rel[active].max()}"


class TestSoftmaxRows:
    def test_rows_normalize(self):
        rows = softmax_rows(np.random.default_rng(8).normal(size=(5, 4)))
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(rows >= 0)

    def test_temperature_sharpens(self):
        z = np.array([[1.0, 0.0]])
        hot = softmax_rows(z, temperature=0.1)
        cold = softmax_rows(z, temperature=10.0)
        assert hot[0, 0] > cold[0, 0]


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        clf = init_classifier(4, 3, 2, seed=19)
        path = tmp_path / "model.bin"
        save_checkpoint(clf, path)
        loaded = load_checkpoint(path, rng_seed=19)
        for name in ("w1", "b1", "w2", "b2"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(clf, name))
        assert loaded.layer_dims == clf.layer_dims

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(BadMagic):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        clf = init_classifier(4, 3, 2, seed=19)
        path = tmp_path / "model.bin"
        save_checkpoint(clf, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(TruncatedFile):
            load_checkpoint(path)
