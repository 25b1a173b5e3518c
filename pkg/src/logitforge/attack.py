"""Two-stage logit poisoning plus the two baseline attacks.

Stage one builds a per-class shuffle table from a classifier the attacker
trains on data it knows: the class representative is split into three
value groups by k-means, the grouping is scrambled by entropy-maximizing
random swaps, a permutation is read off the regrouping, and a final swap
guarantees the largest representative element lands at the slot of the
smallest.  Stage two applies the class-appropriate permutation to every
uploaded row and scales the result.

The baselines are label flipping (an involution on training labels) and
naive poisoning (one fixed large offset vector added to every row).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clustering import kmeans
from .errors import (
    DimensionMismatch,
    EmptyGroup,
    MissingClass,
    TooFewClasses,
    UnknownClass,
)
from .logits import LogitBatch, RepresentativeVector, representative_vector
from .model import Classifier, predict_logits

ORIGIN_TAGS = ("A", "B", "C")

# Spread of the naive offset's components below its peak.  Keeping the
# offset close to uniform preserves each row's argmax, which is the
# regime where the naive baseline is expected to score near zero.
NAIVE_JITTER = 0.1


class AttackKind(Enum):
    LOGIT_SHUFFLE = "logit_shuffle"
    LABEL_FLIP = "label_flip"
    NAIVE = "naive"


@dataclass(frozen=True, eq=False)
class AttackConfig:
    kind: AttackKind
    scaling_factor: float = 2.0
    naive_magnitude: float | None = None
    shuffle_rounds: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.scaling_factor <= 0:
            raise ValueError("scaling_factor must be positive")
        if self.shuffle_rounds < 1:
            raise ValueError("shuffle_rounds must be >= 1")
        if self.naive_magnitude is not None and self.naive_magnitude <= 0:
            raise ValueError("naive_magnitude must be positive when given")


@dataclass(frozen=True, eq=False)
class ElementGrouping:
    """Three ordered groups of logit-element indices plus each element's
    origin tag (the group it was first clustered into)."""

    groups: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
    origin_labels: dict[int, str]

    def __post_init__(self):
        members = [i for group in self.groups for i in group]
        if sorted(members) != list(range(len(members))):
            raise ValueError("groups must partition the element indices")
        if set(self.origin_labels) != set(members):
            raise ValueError("origin labels must cover every element")

    @property
    def element_count(self) -> int:
        return sum(len(g) for g in self.groups)


@dataclass(frozen=True, eq=False)
class ShuffleTable:
    """Per-class index permutations and the representatives behind them."""

    per_class: dict[int, tuple[int, ...]]
    source_stats: dict[int, RepresentativeVector]

    def __post_init__(self):
        for class_id, perm in self.per_class.items():
            if sorted(perm) != list(range(len(perm))):
                raise ValueError(f"permutation for class {class_id} is not a bijection")


def shannon_entropy(tags) -> float:
    """Entropy in bits of the tag frequency distribution."""
    tags = list(tags)
    if not tags:
        raise EmptyGroup("entropy of an empty tag list is undefined")
    counts = np.array(sorted(Counter(tags).values()), dtype=np.float64)
    probs = counts / counts.sum()
    return float(-(probs * np.log2(probs)).sum())


def _total_entropy(groups, origin_labels) -> float:
    return sum(
        shannon_entropy([origin_labels[i] for i in group]) for group in groups if group
    )


def group_elements(rep: RepresentativeVector, seed: int) -> ElementGrouping:
    """Split the representative's elements into three value groups.

    Groups are ordered by descending centroid value, so group A holds the
    highest-scoring elements.  When clustering collapses (fewer than three
    distinct values), elements are dealt into three contiguous chunks of
    the value-sorted order instead.

    Raises:
        TooFewClasses: Representative has fewer than 3 elements.
    """
    values = rep.vector.values
    n = values.shape[0]
    if n < 3:
        raise TooFewClasses(f"grouping needs >= 3 elements, got {n}")
    result = kmeans(values.reshape(-1, 1), 3, seed=seed, max_iter=100, restarts=10)
    counts = np.bincount(result.assignments, minlength=3)
    if np.any(counts == 0):
        by_value = np.argsort(-values, kind="stable")
        chunks = [chunk.tolist() for chunk in np.array_split(by_value, 3)]
    else:
        order = np.argsort(-result.centroids[:, 0], kind="stable")
        chunks = [np.flatnonzero(result.assignments == cluster).tolist() for cluster in order]
    groups = tuple(tuple(int(i) for i in sorted(chunk)) for chunk in chunks)
    origin = {i: ORIGIN_TAGS[g] for g, group in enumerate(groups) for i in group}
    return ElementGrouping(groups, origin)


def maximize_entropy(grouping: ElementGrouping, rounds: int, seed: int) -> ElementGrouping:
    """Scramble group membership by random cross-group swaps.

    Each proposal swaps one element between two distinct groups and is
    kept only when the summed origin-tag entropy strictly increases, so
    group sizes are preserved and total entropy never decreases.
    """
    lists = [list(group) for group in grouping.groups]
    origin = dict(grouping.origin_labels)
    nonempty = [g for g in range(3) if lists[g]]
    rng = np.random.default_rng([seed, 0x5A9])
    entropy = _total_entropy(lists, origin)
    if len(nonempty) >= 2:
        for _ in range(rounds):
            a, b = rng.permutation(nonempty)[:2]
            ia = int(rng.integers(len(lists[a])))
            ib = int(rng.integers(len(lists[b])))
            lists[a][ia], lists[b][ib] = lists[b][ib], lists[a][ia]
            candidate = _total_entropy(lists, origin)
            if candidate > entropy:
                entropy = candidate
            else:
                lists[a][ia], lists[b][ib] = lists[b][ib], lists[a][ia]
    return ElementGrouping(tuple(tuple(lst) for lst in lists), origin)


def _permutation_from_regrouping(
    original: ElementGrouping, shuffled: ElementGrouping
) -> np.ndarray:
    """Each group owns its original slots in list order; the element at
    list position j of the shuffled group is assigned to slot j."""
    n = original.element_count
    perm = np.full(n, -1, dtype=np.int64)
    for slots, members in zip(original.groups, shuffled.groups):
        for slot, element in zip(slots, members):
            perm[slot] = element
    return perm


def _fine_tune_max_to_min(perm: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Swap two permutation entries so the slot of the smallest original
    element receives the largest one."""
    i_max = int(np.argmax(values))
    i_min = int(np.argmin(values))
    holder = int(np.flatnonzero(perm == i_max)[0])
    perm = perm.copy()
    perm[holder], perm[i_min] = perm[i_min], perm[holder]
    return perm


def _mix_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


def build_shuffle_table(
    classifier: Classifier, data, labels, cfg: AttackConfig
) -> ShuffleTable:
    """Run the full table-construction pipeline for every class.

    For each class: average the classifier's logits over that class's
    samples, group the elements, scramble the grouping by entropy
    maximization, read off the permutation, then apply the max-to-min
    fine-tune swap.  With fewer than three classes the grouping stage is
    skipped and only the fine-tune swap applies.

    Raises:
        MissingClass: Some class has no samples in `labels`.
    """
    labels = np.asarray(labels)
    batch = predict_logits(classifier, data)
    class_count = batch.class_count
    present = set(np.unique(labels).tolist())
    for class_id in range(class_count):
        if class_id not in present:
            raise MissingClass(f"class {class_id} has no samples")
    per_class: dict[int, tuple[int, ...]] = {}
    stats: dict[int, RepresentativeVector] = {}
    for class_id in range(class_count):
        rep = representative_vector(batch, labels, class_id)
        if class_count >= 3:
            grouping = group_elements(rep, seed=_mix_seed(cfg.seed, class_id, 1))
            shuffled = maximize_entropy(
                grouping, cfg.shuffle_rounds, seed=_mix_seed(cfg.seed, class_id, 2)
            )
            perm = _permutation_from_regrouping(grouping, shuffled)
        else:
            perm = np.arange(class_count, dtype=np.int64)
        perm = _fine_tune_max_to_min(perm, rep.vector.values)
        per_class[class_id] = tuple(int(i) for i in perm)
        stats[class_id] = rep
    return ShuffleTable(per_class, stats)


def apply_poison(
    batch: LogitBatch, sample_classes, table: ShuffleTable, eta: float
) -> LogitBatch:
    """Permute each row with its class's table entry, then scale by eta.

    Raises:
        UnknownClass: A sample's class is not covered by the table.
        DimensionMismatch: Class list and batch lengths differ.
    """
    sample_classes = np.asarray(sample_classes)
    if sample_classes.shape[0] != batch.sample_count:
        raise DimensionMismatch(
            f"{sample_classes.shape[0]} classes for {batch.sample_count} rows"
        )
    poisoned = np.empty_like(batch.rows)
    perms: dict[int, np.ndarray] = {}
    for class_id in np.unique(sample_classes):
        key = int(class_id)
        if key not in table.per_class:
            raise UnknownClass(f"shuffle table has no entry for class {key}")
        perms[key] = np.array(table.per_class[key], dtype=np.int64)
    for key, perm in perms.items():
        mask = sample_classes == key
        poisoned[mask] = batch.rows[mask][:, perm]
    return LogitBatch(eta * poisoned)


def label_flip(labels, class_count: int) -> np.ndarray:
    """Map every label l to (class_count - 1) - l; applying twice restores
    the original labels."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ValueError("labels outside [0, class_count)")
    return (class_count - 1) - labels


def naive_poison(batch: LogitBatch, magnitude: float, seed: int) -> LogitBatch:
    """Add one fixed near-uniform offset of the given infinity-norm to
    every row.

    The offset's components sit within NAIVE_JITTER of its peak, so row
    argmax positions survive whenever class gaps exceed that spread.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng([seed, 0xA1BE])
    direction = rng.uniform(1.0 - NAIVE_JITTER, 1.0, batch.class_count)
    offset = magnitude * direction / direction.max()
    return LogitBatch(batch.rows + offset)


def default_naive_magnitude(clean: LogitBatch, eta: float) -> float:
    """Match the offset's reach to the scaled-attack value range."""
    return float(eta * np.abs(clean.rows).max())
