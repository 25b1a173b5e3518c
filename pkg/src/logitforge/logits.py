"""Logit-vector types, class-representative averaging, and poisoning scores.

A logit vector holds one unnormalized score per class.  The inter-class
relevance matrix turns one vector into a row-stochastic table of pairwise
distances between its elements; the two scores quantify how much a
manipulated vector disturbs that table (score_s1) and the location and
confidence of the winning class (score_s2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoSamplesForClass


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LogitVector:
    """Unnormalized per-class scores emitted by a classifier."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1:
            raise DimensionMismatch(f"logit vector must be 1-D, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise DimensionMismatch("logit vector needs at least 2 classes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logit vector contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def class_count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class LogitBatch:
    """Per-sample logit vectors aligned index-for-index with an evaluation set."""

    rows: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.rows)
        if arr.ndim != 2:
            raise DimensionMismatch(f"logit batch must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimensionMismatch("logit batch needs at least one row")
        if arr.shape[1] < 2:
            raise DimensionMismatch("logit batch needs at least 2 classes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logit batch contains non-finite values")
        object.__setattr__(self, "rows", arr)

    @property
    def sample_count(self) -> int:
        return self.rows.shape[0]

    @property
    def class_count(self) -> int:
        return self.rows.shape[1]

    def vector(self, index: int) -> LogitVector:
        return LogitVector(self.rows[index])


@dataclass(frozen=True, eq=False)
class RepresentativeVector:
    """Per-class mean logit vector plus the number of rows it averages."""

    class_id: int
    vector: LogitVector
    sample_count: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError("class_id must be nonnegative")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Row-stochastic matrix of pairwise distances between logit elements.

    Each row i holds the normalized absolute gaps |e_i - e_j|; the diagonal
    is exactly zero.  A constant input vector has no gaps to normalize, so
    the matrix degenerates to all zeros and `degenerate` is set.
    """

    entries: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        arr = _frozen_array(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"distance matrix must be square, got {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("distance matrix entries must be nonnegative")
        if np.any(np.diag(arr) != 0.0):
            raise ValueError("distance matrix diagonal must be exactly zero")
        row_sums = arr.sum(axis=1)
        zero_rows = row_sums == 0.0
        if not np.all(zero_rows | (np.abs(row_sums - 1.0) <= 1e-9)):
            raise ValueError("each non-degenerate row must sum to 1")
        if np.any(zero_rows) and not self.degenerate:
            raise ValueError("all-zero row requires the degenerate flag")
        object.__setattr__(self, "entries", arr)

    @property
    def class_count(self) -> int:
        return self.entries.shape[0]


def representative_vector(batch: LogitBatch, labels, class_id: int) -> RepresentativeVector:
    """Average the batch rows labeled `class_id` into one representative.

    Args:
        batch: Logit rows aligned with `labels`.
        labels: Per-row class ids, same length as the batch.
        class_id: Class to average.

    Raises:
        NoSamplesForClass: No row carries the requested label.
        DimensionMismatch: Label list and batch lengths differ.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != batch.sample_count:
        raise DimensionMismatch(
            f"{labels.shape[0]} labels for {batch.sample_count} rows"
        )
    mask = labels == class_id
    count = int(mask.sum())
    if count == 0:
        raise NoSamplesForClass(f"no rows labeled {class_id}")
    mean = batch.rows[mask].mean(axis=0)
    return RepresentativeVector(int(class_id), LogitVector(mean), count)


def relevance_matrix(v: LogitVector) -> DistanceMatrix:
    """Build the inter-class relevance (distance) matrix of one vector.

    Entry (i, j) is |e_i - e_j| normalized by row i's total absolute gap,
    so every non-degenerate row sums to one and the diagonal is zero.
    A constant vector yields the all-zero matrix with `degenerate` set.
    """
    e = v.values
    gaps = np.abs(e[:, None] - e[None, :])
    row_sums = gaps.sum(axis=1)
    degenerate = bool(np.any(row_sums == 0.0))
    safe = np.where(row_sums == 0.0, 1.0, row_sums)
    entries = gaps / safe[:, None]
    return DistanceMatrix(entries, degenerate=degenerate)


def argmax_index(v: LogitVector) -> int:
    """Index of the largest logit element; ties break to the lowest index."""
    return int(np.argmax(v.values))


def score_s1(original: LogitVector, poisoned: LogitVector) -> float:
    """Relevance-disruption score: L1 distance between the two distance matrices.

    Symmetric in its arguments, zero for identical vectors, and blind to
    pure positive scaling (the matrices are scale-invariant).
    """
    if original.class_count != poisoned.class_count:
        raise DimensionMismatch(
            f"{original.class_count} vs {poisoned.class_count} classes"
        )
    m = relevance_matrix(original).entries
    m_poisoned = relevance_matrix(poisoned).entries
    return float(np.abs(m - m_poisoned).sum())


def score_s2(original: LogitVector, poisoned: LogitVector) -> float:
    """Max-position displacement score.

    With i_m the original argmax and i_m' the poisoned argmax, returns the
    value change at i_m' weighted by the original distance between the two
    positions.  Zero whenever the argmax does not move.
    """
    if original.class_count != poisoned.class_count:
        raise DimensionMismatch(
            f"{original.class_count} vs {poisoned.class_count} classes"
        )
    i_m = argmax_index(original)
    i_m_poisoned = argmax_index(poisoned)
    if i_m == i_m_poisoned:
        return 0.0
    distance = relevance_matrix(original).entries[i_m, i_m_poisoned]
    value_gap = abs(original.values[i_m_poisoned] - poisoned.values[i_m_poisoned])
    return float(value_gap * distance)
