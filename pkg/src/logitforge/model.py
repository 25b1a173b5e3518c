"""Single-hidden-layer classifier with supervised and distillation training.

The network is input -> hidden (rectifier) -> output, trained by plain
mini-batch gradient descent.  Three losses are supported: cross-entropy on
hard labels, mean absolute error on raw logit targets, and KL divergence
after mapping both targets and outputs through a softmax.  Training is a
pure function: it returns a new Classifier and never mutates its input, so
distinct clients can train concurrently on shared snapshots.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyDataset,
    InvalidDistribution,
    NonFiniteLoss,
    TruncatedFile,
)
from .logits import LogitBatch

CHECKPOINT_MAGIC = b"LFMD"
CHECKPOINT_VERSION = 1


class LossKind(Enum):
    CROSS_ENTROPY = "cross_entropy"
    MAE = "mae"
    KL = "kl"


@dataclass(frozen=True, eq=False)
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int
    loss_kind: LossKind

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True, eq=False)
class Classifier:
    """Immutable parameter snapshot of the feed-forward network.

    `train_calls` counts completed training invocations so repeated rounds
    draw distinct, reproducible shuffle streams from the same seed.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    layer_dims: tuple[int, int, int]
    rng_seed: int
    train_calls: int = 0

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[2]


def init_classifier(input_dim: int, hidden_dim: int, class_count: int, seed: int) -> Classifier:
    """Seeded uniform Glorot initialization; biases start at zero."""
    if input_dim < 1 or hidden_dim < 1 or class_count < 2:
        raise ValueError("layer dims must be positive with at least 2 classes")
    rng = np.random.default_rng([seed, 0x1F17])
    lim1 = np.sqrt(6.0 / (input_dim + hidden_dim))
    lim2 = np.sqrt(6.0 / (hidden_dim + class_count))
    return Classifier(
        w1=rng.uniform(-lim1, lim1, (input_dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.uniform(-lim2, lim2, (hidden_dim, class_count)),
        b2=np.zeros(class_count),
        layer_dims=(input_dim, hidden_dim, class_count),
        rng_seed=seed,
    )


def _forward(clf: Classifier, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = np.maximum(X @ clf.w1 + clf.b1, 0.0)
    return hidden @ clf.w2 + clf.b2, hidden


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict_logits(clf: Classifier, X) -> LogitBatch:
    """Raw pre-softmax outputs for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != clf.input_dim:
        raise DimensionMismatch(
            f"expected samples of dim {clf.input_dim}, got shape {X.shape}"
        )
    logits, _ = _forward(clf, X)
    return LogitBatch(logits)


def softmax_rows(rows, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of rows/temperature."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return _softmax(np.asarray(rows, dtype=np.float64) / temperature)


def evaluate(clf: Classifier, X, labels) -> tuple[float, float]:
    """Accuracy and mean cross-entropy of the classifier on (X, labels)."""
    labels = np.asarray(labels)
    logits = predict_logits(clf, X).rows
    accuracy = float((logits.argmax(axis=1) == labels).mean())
    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(labels.shape[0]), labels].mean())
    return accuracy, loss


def _batch_objective(clf: Classifier, X: np.ndarray, targets, kind: LossKind):
    """Loss and parameter gradients for one batch.

    CE averages over samples, MAE over all elements, KL over samples
    (targets and outputs both pass through a softmax, targets clamped
    away from zero).  Returns (loss, gradient dict).
    """
    n = X.shape[0]
    logits, hidden = _forward(clf, X)
    if kind is LossKind.CROSS_ENTROPY:
        labels = np.asarray(targets)
        log_probs = _log_softmax(logits)
        loss = float(-log_probs[np.arange(n), labels].mean())
        dz = _softmax(logits)
        dz[np.arange(n), labels] -= 1.0
        dz /= n
    elif kind is LossKind.MAE:
        diff = logits - np.asarray(targets, dtype=np.float64)
        loss = float(np.abs(diff).mean())
        dz = np.sign(diff) / diff.size
    elif kind is LossKind.KL:
        target_probs = np.maximum(_softmax(np.asarray(targets, dtype=np.float64)), 1e-12)
        probs = _softmax(logits)
        per_row = (target_probs * (np.log(target_probs) - _log_softmax(logits))).sum(axis=1)
        loss = float(per_row.mean())
        dz = (probs * target_probs.sum(axis=1, keepdims=True) - target_probs) / n
    else:
        raise ValueError(f"unsupported loss kind {kind}")
    grad_w2 = hidden.T @ dz
    grad_b2 = dz.sum(axis=0)
    d_hidden = dz @ clf.w2.T
    d_hidden[hidden <= 0.0] = 0.0
    grad_w1 = X.T @ d_hidden
    grad_b1 = d_hidden.sum(axis=0)
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def _run_epochs(clf: Classifier, X: np.ndarray, targets, cfg: TrainConfig) -> Classifier:
    n = X.shape[0]
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    rng = np.random.default_rng([clf.rng_seed, 0x7E41, clf.train_calls])
    params = {"w1": clf.w1.copy(), "b1": clf.b1.copy(), "w2": clf.w2.copy(), "b2": clf.b2.copy()}
    targets = np.asarray(targets)
    current = replace(clf, **params)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = _batch_objective(current, X[idx], targets[idx], cfg.loss_kind)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss}")
            for name, grad in grads.items():
                params[name] -= cfg.learning_rate * grad
            current = replace(current, **params)
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise NonFiniteLoss("parameters left the finite range")
    return replace(clf, **params, train_calls=clf.train_calls + 1)


def train_supervised(clf: Classifier, X, Y, cfg: TrainConfig) -> Classifier:
    """Mini-batch gradient descent on hard labels with cross-entropy.

    Deterministic given the classifier's seed and call count; the input
    classifier is left untouched.
    """
    if cfg.loss_kind is not LossKind.CROSS_ENTROPY:
        raise ValueError("train_supervised requires the cross-entropy loss")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    if X.shape[0] == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} samples vs {Y.shape[0]} labels")
    if X.shape[1] != clf.input_dim:
        raise DimensionMismatch(f"expected input dim {clf.input_dim}, got {X.shape[1]}")
    if Y.min(initial=0) < 0 or Y.max(initial=0) >= clf.class_count:
        raise ValueError("labels outside [0, class_count)")
    return _run_epochs(clf, X, Y, cfg)


def distill(clf: Classifier, X0, targets: LogitBatch, cfg: TrainConfig) -> Classifier:
    """Train against soft targets on the public set (MAE or KL)."""
    if cfg.loss_kind not in (LossKind.MAE, LossKind.KL):
        raise ValueError("distill requires the MAE or KL loss")
    X0 = np.asarray(X0, dtype=np.float64)
    if X0.shape[0] != targets.sample_count:
        raise DimensionMismatch(
            f"{X0.shape[0]} samples vs {targets.sample_count} target rows"
        )
    if X0.shape[1] != clf.input_dim:
        raise DimensionMismatch(f"expected input dim {clf.input_dim}, got {X0.shape[1]}")
    if targets.class_count != clf.class_count:
        raise DimensionMismatch(
            f"targets have {targets.class_count} classes, model {clf.class_count}"
        )
    return _run_epochs(clf, X0, targets.rows, cfg)


def _validate_rows_distribution(rows: np.ndarray, name: str):
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-6):
        raise InvalidDistribution(f"{name} rows must be nonnegative and sum to 1")


def loss_value(kind: LossKind, predictions, targets) -> float:
    """Scalar loss between aligned prediction and target arrays.

    Cross-entropy takes probability rows against integer labels and
    averages over samples.  MAE averages absolute differences over all
    elements.  KL takes two stacks of probability rows and sums the
    per-row divergences.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    if kind is LossKind.CROSS_ENTROPY:
        labels = np.asarray(targets)
        if predictions.ndim != 2 or labels.shape[0] != predictions.shape[0]:
            raise DimensionMismatch("predictions and labels are misaligned")
        _validate_rows_distribution(predictions, "prediction")
        picked = predictions[np.arange(predictions.shape[0]), labels]
        return float(-np.log(np.maximum(picked, 1e-12)).mean())
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise DimensionMismatch(f"{predictions.shape} vs {targets.shape}")
    if kind is LossKind.MAE:
        return float(np.abs(predictions - targets).mean())
    if kind is LossKind.KL:
        _validate_rows_distribution(predictions, "prediction")
        _validate_rows_distribution(targets, "target")
        safe_pred = np.maximum(predictions, 1e-12)
        terms = np.where(targets > 0, targets * np.log(targets / safe_pred), 0.0)
        return float(terms.sum())
    raise ValueError(f"unsupported loss kind {kind}")


def save_checkpoint(clf: Classifier, path):
    """Flat binary checkpoint: magic, version, dims, then little-endian
    64-bit parameters in layer order, row-major."""
    d, h, c = clf.layer_dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIII", CHECKPOINT_VERSION, d, h, c))
        for part in (clf.w1, clf.b1, clf.w2, clf.b2):
            fh.write(part.astype("<f8").tobytes(order="C"))


def load_checkpoint(path, rng_seed: int = 0) -> Classifier:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagic(f"expected {CHECKPOINT_MAGIC!r} header")
    if len(blob) < 20:
        raise TruncatedFile("checkpoint header incomplete")
    version, d, h, c = struct.unpack("<IIII", blob[4:20])
    if version != CHECKPOINT_VERSION:
        raise BadMagic(f"unsupported checkpoint version {version}")
    counts = [d * h, h, h * c, c]
    expected = 20 + 8 * sum(counts)
    if len(blob) < expected:
        raise TruncatedFile(f"expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob[20:expected], dtype="<f8")
    parts = []
    offset = 0
    for count in counts:
        parts.append(flat[offset : offset + count].copy())
        offset += count
    return Classifier(
        w1=parts[0].reshape(d, h),
        b1=parts[1],
        w2=parts[2].reshape(h, c),
        b2=parts[3],
        layer_dims=(d, h, c),
        rng_seed=rng_seed,
    )
