"""Robust logit aggregation by benign-majority estimation.

For every class the server averages each user's uploaded rows into a
representative vector, spectral-clusters the representatives, and treats
the largest cluster's centroid as the benign distribution for that class.
Cosine similarity to that centroid, pushed through a temperature softmax
across users, yields per-user per-class weights; the global logits are the
weighted mean of the uploads under the class-averaged user weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import spectral_cluster
from .errors import (
    DimensionMismatch,
    MissingClass,
    NonPositiveTemperature,
    ZeroNormRepresentative,
)
from .logits import LogitBatch, LogitVector, RepresentativeVector, representative_vector

DEFAULT_TEMPERATURE = 0.5
DEFAULT_CLUSTERS = 2
_CLUSTER_SEED = 0x5EED


@dataclass(frozen=True, eq=False)
class AggregationWeights:
    """Defense weights: per_class[k, c] is user k's weight for class c,
    per_user[k] the class average (already summing to one)."""

    per_class: np.ndarray
    per_user: np.ndarray
    temperature: float

    def __post_init__(self):
        per_class = np.asarray(self.per_class, dtype=np.float64)
        per_user = np.asarray(self.per_user, dtype=np.float64)
        if per_class.ndim != 2 or per_user.shape != (per_class.shape[0],):
            raise DimensionMismatch("weight shapes are inconsistent")
        if np.any(per_class < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.abs(per_class.sum(axis=0) - 1.0) > 1e-9):
            raise ValueError("per-class weights must sum to 1 across users")
        if np.any(np.abs(per_user - per_class.mean(axis=1)) > 1e-9):
            raise ValueError("per-user weights must be the class average")
        object.__setattr__(self, "per_class", per_class)
        object.__setattr__(self, "per_user", per_user)


@dataclass(frozen=True, eq=False)
class DefenseAudit:
    """Error-cancellation audit of one synthetic or recorded cohort."""

    benign_mean: tuple[LogitVector, ...]
    per_user_similarity: np.ndarray
    gap: np.ndarray
    error_term: np.ndarray
    defended_deviation: float
    undefended_deviation: float


def user_class_representatives(batches, public_labels) -> list[list[RepresentativeVector]]:
    """Per-user, per-class mean logit vectors over the public rows.

    Raises:
        MissingClass: Some class id has no public rows.
    """
    public_labels = np.asarray(public_labels)
    class_count = batches[0].class_count
    present = set(np.unique(public_labels).tolist())
    for class_id in range(class_count):
        if class_id not in present:
            raise MissingClass(f"class {class_id} missing from public labels")
    table = []
    for batch in batches:
        table.append(
            [representative_vector(batch, public_labels, c) for c in range(class_count)]
        )
    return table


def benign_centroid(reps_for_class, k_clusters: int = DEFAULT_CLUSTERS, seed: int = _CLUSTER_SEED):
    """Estimate the benign distribution for one class.

    Spectral-clusters the users' representative vectors and averages the
    largest cluster (ties break to the lowest cluster label).

    Returns:
        (benign mean as LogitVector, boolean member flags per user).
    """
    vectors = np.stack([rep.values for rep in _as_vectors(reps_for_class)])
    if vectors.shape[0] < 2:
        raise ValueError("benign estimation needs at least 2 users")
    result = spectral_cluster(vectors, k_clusters, seed=seed)
    counts = np.bincount(result.labels, minlength=k_clusters)
    benign_label = int(np.argmax(counts))
    flags = result.labels == benign_label
    return LogitVector(vectors[flags].mean(axis=0)), flags


def _as_vectors(reps) -> list[LogitVector]:
    out = []
    for rep in reps:
        out.append(rep.vector if isinstance(rep, RepresentativeVector) else rep)
    return out


def temperature_softmax(similarities, temperature: float) -> np.ndarray:
    """Softmax of similarities/temperature with max-subtraction."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    scores = np.asarray(similarities, dtype=np.float64) / temperature
    scores = scores - scores.max()
    exps = np.exp(scores)
    return exps / exps.sum()


def _per_class_defense(batches, public_labels, temperature, k_clusters, seed):
    """Similarities, weights, and benign means for every class.

    Detection runs on representatives with the cohort-average offset
    removed.  Logit exchange accumulates a shared constant offset round
    over round (local cross-entropy training is shift-invariant and
    never removes it), which drives raw cosines of honest and poisoned
    vectors alike toward one.  Subtracting the cohort mean cancels that
    shared drift while keeping each user's own deviation from the
    cohort, constant offsets included, fully visible.
    """
    reps = user_class_representatives(batches, public_labels)
    user_count = len(batches)
    class_count = batches[0].class_count
    similarity = np.zeros((user_count, class_count))
    weights = np.zeros((user_count, class_count))
    benign_means = []
    for class_id in range(class_count):
        raw = np.stack([reps[k][class_id].vector.values for k in range(user_count)])
        if np.any(np.linalg.norm(raw, axis=1) == 0.0):
            raise ZeroNormRepresentative(f"zero-norm representative for class {class_id}")
        centered = raw - raw.mean()
        norms = np.linalg.norm(centered, axis=1)
        if np.any(norms == 0.0):
            raise ZeroNormRepresentative(
                f"representative equals the cohort mean for class {class_id}"
            )
        result = spectral_cluster(centered, k_clusters, seed=seed)
        counts = np.bincount(result.labels, minlength=k_clusters)
        flags = result.labels == int(np.argmax(counts))
        benign_vector = centered[flags].mean(axis=0)
        benign_norm = np.linalg.norm(benign_vector)
        if benign_norm == 0.0:
            raise ZeroNormRepresentative(f"zero-norm benign mean for class {class_id}")
        similarity[:, class_id] = np.clip(
            centered @ benign_vector / (norms * benign_norm), -1.0, 1.0
        )
        weights[:, class_id] = temperature_softmax(similarity[:, class_id], temperature)
        benign_means.append(LogitVector(raw[flags].mean(axis=0)))
    return similarity, weights, benign_means


def robust_aggregate(
    batches,
    public_labels,
    temperature: float = DEFAULT_TEMPERATURE,
    k_clusters: int = DEFAULT_CLUSTERS,
    seed: int = _CLUSTER_SEED,
):
    """Weighted global logits under the benign-majority defense.

    Args:
        batches: One LogitBatch per user, aligned with `public_labels`.
        public_labels: Class id per public row.
        temperature: Softmax temperature; below 1 sharpens the gap
            between benign and anomalous users.
        k_clusters: Spectral cluster count for benign estimation.
        seed: Clustering seed (fixed default keeps runs reproducible).

    Returns:
        (global LogitBatch, AggregationWeights).
    """
    if len(batches) < 2:
        raise ValueError("aggregation needs at least 2 users")
    shape = batches[0].rows.shape
    for batch in batches[1:]:
        if batch.rows.shape != shape:
            raise DimensionMismatch("user batches are not aligned")
    _, weights, _ = _per_class_defense(batches, public_labels, temperature, k_clusters, seed)
    per_user = weights.mean(axis=1)
    normalized = per_user / per_user.sum()
    stacked = np.stack([batch.rows for batch in batches])
    global_rows = np.tensordot(normalized, stacked, axes=1)
    return LogitBatch(global_rows), AggregationWeights(weights, per_user, temperature)


def error_cancellation_audit(
    batches,
    malicious_flags,
    public_labels,
    temperature: float = DEFAULT_TEMPERATURE,
    k_clusters: int = DEFAULT_CLUSTERS,
) -> DefenseAudit:
    """Quantify how much of the adversarial error term the defense removes.

    The gap is the row-mean difference between malicious and honest
    uploads; the error term is what that gap contributes to an unweighted
    aggregate.  Deviations measure the distance (L2 over row means) of
    the defended and undefended aggregates from the honest mean.
    """
    malicious_flags = np.asarray(malicious_flags, dtype=bool)
    if malicious_flags.shape[0] != len(batches):
        raise DimensionMismatch("one malicious flag per user batch required")
    if not malicious_flags.any() or malicious_flags.all():
        raise ValueError("audit needs both honest and malicious users")
    similarity, weights, benign_means = _per_class_defense(
        batches, public_labels, temperature, k_clusters, _CLUSTER_SEED
    )
    per_user = weights.mean(axis=1)
    normalized = per_user / per_user.sum()
    stacked = np.stack([batch.rows for batch in batches])
    defended = np.tensordot(normalized, stacked, axes=1)
    undefended = stacked.mean(axis=0)

    honest_mean = stacked[~malicious_flags].mean(axis=0)
    malicious_mean = stacked[malicious_flags].mean(axis=0)
    honest_rowmean = honest_mean.mean(axis=0)
    gap = malicious_mean.mean(axis=0) - honest_rowmean
    a_count = int(malicious_flags.sum())
    h_count = int((~malicious_flags).sum())
    error_term = a_count * gap + (a_count / h_count - 1.0) * h_count * honest_rowmean

    defended_dev = float(np.linalg.norm(defended.mean(axis=0) - honest_rowmean))
    undefended_dev = float(np.linalg.norm(undefended.mean(axis=0) - honest_rowmean))
    return DefenseAudit(
        benign_mean=tuple(benign_means),
        per_user_similarity=similarity,
        gap=gap,
        error_term=error_term,
        defended_deviation=defended_dev,
        undefended_deviation=undefended_dev,
    )
