"""Round orchestration for the three logit-exchange collaboration schemes.

FedMD and DS-FL exchange per-sample logits on a shared public set; FedDF
exchanges model parameters and the server recomputes the logits itself.
Malicious clients enter here: for the logit-exchange schemes they poison
their uploads after prediction, for FedDF the label-flip baseline poisons
their private shards while the scaled-shuffle and naive attacks ride the
rows the server computes from their models.

Every source of randomness is a child stream of the master seed keyed by
purpose and client id, so parallel client scheduling cannot change results.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .attack import (
    AttackConfig,
    AttackKind,
    ShuffleTable,
    apply_poison,
    build_shuffle_table,
    default_naive_magnitude,
    label_flip,
    naive_poison,
)
from .data import Dataset
from .defense import robust_aggregate
from .errors import ArchitectureMismatch, DimensionMismatch, InsufficientData
from .logits import LogitBatch, representative_vector, score_s1, score_s2
from .model import (
    Classifier,
    LossKind,
    TrainConfig,
    distill,
    evaluate,
    init_classifier,
    predict_logits,
    softmax_rows,
    train_supervised,
)

THREADS_ENV = "LOGITFORGE_THREADS"


class Scheme(Enum):
    FEDMD = "fedmd"
    DSFL = "dsfl"
    FEDDF = "feddf"


@dataclass(frozen=True, eq=False)
class FederationConfig:
    scheme: Scheme
    clients: int
    attacker_fraction: float
    rounds: int
    public_size: int
    test_size: int
    attack: AttackConfig | None = None
    defense_enabled: bool = False
    defense_temperature: float = 0.5
    defense_clusters: int = 2
    era_temperature: float = 0.1
    hidden_units: int = 64
    epochs_local: int = 1
    epochs_transfer: int = 3
    epochs_server: int = 1
    lr_local: float = 2e-6
    lr_transfer: float = 1e-5
    lr_server: float = 1e-5
    lr_pretrain: float | None = None
    pretrain_epochs: int | None = None
    batch_size: int = 32
    attacker_epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.clients < 1:
            raise ValueError("need at least one client")
        if not 0.0 <= self.attacker_fraction < 0.5:
            raise ValueError("attacker_fraction must lie in [0, 0.5)")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.public_size < 1 or self.test_size < 1:
            raise ValueError("public and test splits must be nonempty")
        if self.defense_temperature <= 0 or self.era_temperature <= 0:
            raise ValueError("temperatures must be positive")


@dataclass(eq=False)
class ClientState:
    id: int
    classifier: Classifier
    features: np.ndarray
    labels: np.ndarray
    is_malicious: bool
    attack_table: ShuffleTable | None = None
    naive_magnitude: float | None = None


@dataclass(frozen=True, eq=False)
class RoundMetrics:
    round: int
    mean_test_accuracy: float
    mean_test_loss: float
    per_client_accuracy: tuple[float, ...]


@dataclass(eq=False)
class RunTrace:
    """Optional side collector for report artifacts."""

    malicious_ids: tuple[int, ...] = ()
    shuffle_table: ShuffleTable | None = None
    weight_history: list[dict] = field(default_factory=list)
    score_history: list[dict] = field(default_factory=list)


def child_seed(master: int, *tags) -> int:
    """Deterministic child seed from the master seed and purpose tags."""
    parts = [int(master) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            parts.append(zlib.crc32(tag.encode()))
        else:
            parts.append(int(tag) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _worker_count(task_count: int) -> int:
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, task_count))


def _pmap(fn, items):
    """Ordered map over independent per-client work items."""
    items = list(items)
    workers = _worker_count(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def partition(dataset: Dataset, clients: int, public_size: int, test_size: int, seed: int):
    """Disjoint shuffled split into equal private shards, public, and test.

    Remainder samples that do not divide evenly among clients are dropped.

    Raises:
        InsufficientData: Not enough samples for the requested split.
    """
    if clients < 1:
        raise ValueError("need at least one client")
    total = dataset.sample_count
    if public_size + test_size > total:
        raise InsufficientData(
            f"split needs {public_size + test_size} samples, dataset has {total}"
        )
    private_total = total - public_size - test_size
    shard_size = private_total // clients
    if shard_size < 1:
        raise InsufficientData(f"{private_total} private samples for {clients} clients")
    rng = np.random.default_rng([seed, 0x5411])
    order = rng.permutation(total)
    public = dataset.subset(order[:public_size])
    test = dataset.subset(order[public_size : public_size + test_size])
    shards = []
    offset = public_size + test_size
    for _ in range(clients):
        shards.append(dataset.subset(order[offset : offset + shard_size]))
        offset += shard_size
    return shards, public, test


def aggregate_mean(batches) -> LogitBatch:
    """Element-wise arithmetic mean of aligned logit batches."""
    if not batches:
        raise ValueError("nothing to aggregate")
    shape = batches[0].rows.shape
    for batch in batches[1:]:
        if batch.rows.shape != shape:
            raise DimensionMismatch("batches are not aligned")
    return LogitBatch(np.stack([b.rows for b in batches]).mean(axis=0))


def _build_clients(cfg: FederationConfig, shards, input_dim: int, class_count: int):
    malicious_count = int(cfg.clients * cfg.attacker_fraction)
    malicious = set(range(cfg.clients - malicious_count, cfg.clients))
    clients = []
    for k in range(cfg.clients):
        labels = shards[k].labels
        if (
            cfg.attack is not None
            and cfg.attack.kind is AttackKind.LABEL_FLIP
            and k in malicious
        ):
            labels = label_flip(labels, class_count)
        classifier = init_classifier(
            input_dim, cfg.hidden_units, class_count, child_seed(cfg.seed, "client", k)
        )
        clients.append(
            ClientState(k, classifier, shards[k].features, labels, k in malicious)
        )
    return clients, tuple(sorted(malicious))


def _prepare_shuffle_table(cfg: FederationConfig, public: Dataset) -> ShuffleTable:
    """Stage one of the scaled-shuffle attack: the attacker trains its own
    classifier on the public data and derives per-class permutations."""
    attacker = init_classifier(
        public.feature_dim,
        cfg.hidden_units,
        public.class_count,
        child_seed(cfg.seed, "attacker"),
    )
    train_cfg = TrainConfig(
        cfg.attacker_epochs, cfg.lr_local, cfg.batch_size, LossKind.CROSS_ENTROPY
    )
    attacker = train_supervised(attacker, public.features, public.labels, train_cfg)
    table_cfg = replace(cfg.attack, seed=child_seed(cfg.seed, "table", cfg.attack.seed))
    return build_shuffle_table(attacker, public.features, public.labels, table_cfg)


def _poison_uploads(cfg, clients, uploads, class_keys_fn):
    """Apply the configured upload transformation to malicious clients."""
    if cfg.attack is None:
        return uploads
    kind = cfg.attack.kind
    out = list(uploads)
    for k, client in enumerate(clients):
        if not client.is_malicious:
            continue
        if kind is AttackKind.LOGIT_SHUFFLE:
            out[k] = apply_poison(
                uploads[k],
                class_keys_fn(uploads[k]),
                client.attack_table,
                cfg.attack.scaling_factor,
            )
        elif kind is AttackKind.NAIVE:
            # The offset vector is fixed for the whole run: direction from
            # the attack seed, magnitude anchored to the first clean upload.
            if client.naive_magnitude is None:
                client.naive_magnitude = cfg.attack.naive_magnitude
                if client.naive_magnitude is None:
                    client.naive_magnitude = default_naive_magnitude(
                        uploads[k], cfg.attack.scaling_factor
                    )
            out[k] = naive_poison(
                uploads[k],
                client.naive_magnitude,
                child_seed(cfg.seed, "naive", cfg.attack.seed),
            )
    return out


def _record_scores(trace, round_no, cfg, clients, uploads, public_labels):
    """Mean poisoning scores of malicious uploads against the honest mean."""
    if trace is None or cfg.attack is None:
        return
    honest = [uploads[k] for k, c in enumerate(clients) if not c.is_malicious]
    malicious = [uploads[k] for k, c in enumerate(clients) if c.is_malicious]
    if not honest or not malicious:
        return
    reference = aggregate_mean(honest)
    class_count = reference.class_count
    ref_reps = [
        representative_vector(reference, public_labels, c).vector
        for c in range(class_count)
    ]
    s1_values, s2_values = [], []
    for batch in malicious:
        reps = [
            representative_vector(batch, public_labels, c).vector
            for c in range(class_count)
        ]
        s1_values.append(np.mean([score_s1(ref_reps[c], reps[c]) for c in range(class_count)]))
        s2_values.append(np.mean([score_s2(ref_reps[c], reps[c]) for c in range(class_count)]))
    trace.score_history.append(
        {
            "round": round_no,
            "s1_mean": float(np.mean(s1_values)),
            "s2_mean": float(np.mean(s2_values)),
        }
    )


def _aggregate(cfg, uploads, public_labels, round_no, trace):
    if cfg.defense_enabled:
        global_batch, weights = robust_aggregate(
            uploads,
            public_labels,
            temperature=cfg.defense_temperature,
            k_clusters=cfg.defense_clusters,
        )
        if trace is not None:
            normalized = weights.per_user / weights.per_user.sum()
            trace.weight_history.append(
                {
                    "round": round_no,
                    "w_kc": weights.per_class.tolist(),
                    "w_k": normalized.tolist(),
                }
            )
        return global_batch
    return aggregate_mean(uploads)


def _evaluate_clients(clients, test: Dataset):
    results = _pmap(lambda c: evaluate(c.classifier, test.features, test.labels), clients)
    accuracies = tuple(acc for acc, _ in results)
    losses = [loss for _, loss in results]
    return accuracies, float(np.mean(losses))


def run_fedmd(cfg: FederationConfig, dataset: Dataset, trace: RunTrace | None = None):
    """Logit exchange with public-set pretraining and an MAE digest.

    Per round: clients upload logits on the public set, the server takes
    the (plain or robust) mean, clients digest the global logits and then
    revisit their private shards.
    """
    shards, public, test = partition(
        dataset, cfg.clients, cfg.public_size, cfg.test_size, cfg.seed
    )
    clients, malicious_ids = _build_clients(
        cfg, shards, dataset.feature_dim, dataset.class_count
    )
    if trace is not None:
        trace.malicious_ids = malicious_ids
    if cfg.attack is not None and cfg.attack.kind is AttackKind.LOGIT_SHUFFLE:
        table = _prepare_shuffle_table(cfg, public)
        for client in clients:
            if client.is_malicious:
                client.attack_table = table
        if trace is not None:
            trace.shuffle_table = table

    local_cfg = TrainConfig(cfg.epochs_local, cfg.lr_local, cfg.batch_size, LossKind.CROSS_ENTROPY)
    init_cfg = TrainConfig(
        cfg.pretrain_epochs or cfg.epochs_transfer,
        cfg.lr_pretrain or cfg.lr_local,
        cfg.batch_size,
        LossKind.CROSS_ENTROPY,
    )
    digest_cfg = TrainConfig(cfg.epochs_transfer, cfg.lr_transfer, cfg.batch_size, LossKind.MAE)

    def pretrain(client):
        clf = train_supervised(client.classifier, public.features, public.labels, init_cfg)
        return train_supervised(clf, client.features, client.labels, local_cfg)

    for client, clf in zip(clients, _pmap(pretrain, clients)):
        client.classifier = clf

    metrics = []
    for round_no in range(1, cfg.rounds + 1):
        uploads = _pmap(lambda c: predict_logits(c.classifier, public.features), clients)
        uploads = _poison_uploads(cfg, clients, uploads, lambda _batch: public.labels)
        _record_scores(trace, round_no, cfg, clients, uploads, public.labels)
        global_batch = _aggregate(cfg, uploads, public.labels, round_no, trace)

        def digest_and_revisit(client):
            clf = distill(client.classifier, public.features, global_batch, digest_cfg)
            return train_supervised(clf, client.features, client.labels, local_cfg)

        for client, clf in zip(clients, _pmap(digest_and_revisit, clients)):
            client.classifier = clf
        accuracies, mean_loss = _evaluate_clients(clients, test)
        metrics.append(
            RoundMetrics(round_no, float(np.mean(accuracies)), mean_loss, accuracies)
        )
    return metrics


def run_dsfl(cfg: FederationConfig, dataset: Dataset, trace: RunTrace | None = None):
    """Logit exchange with entropy-reduction aggregation.

    Per round: clients train locally, upload logits, the server sharpens
    the (plain or robust) mean through a low-temperature softmax, and
    clients digest the sharpened rows with the MAE loss.
    """
    shards, public, test = partition(
        dataset, cfg.clients, cfg.public_size, cfg.test_size, cfg.seed
    )
    clients, malicious_ids = _build_clients(
        cfg, shards, dataset.feature_dim, dataset.class_count
    )
    if trace is not None:
        trace.malicious_ids = malicious_ids
    if cfg.attack is not None and cfg.attack.kind is AttackKind.LOGIT_SHUFFLE:
        table = _prepare_shuffle_table(cfg, public)
        for client in clients:
            if client.is_malicious:
                client.attack_table = table
        if trace is not None:
            trace.shuffle_table = table

    local_cfg = TrainConfig(cfg.epochs_local, cfg.lr_local, cfg.batch_size, LossKind.CROSS_ENTROPY)
    digest_cfg = TrainConfig(cfg.epochs_transfer, cfg.lr_transfer, cfg.batch_size, LossKind.MAE)

    metrics = []
    for round_no in range(1, cfg.rounds + 1):
        for client, clf in zip(
            clients,
            _pmap(
                lambda c: train_supervised(c.classifier, c.features, c.labels, local_cfg),
                clients,
            ),
        ):
            client.classifier = clf
        uploads = _pmap(lambda c: predict_logits(c.classifier, public.features), clients)
        uploads = _poison_uploads(cfg, clients, uploads, lambda _batch: public.labels)
        _record_scores(trace, round_no, cfg, clients, uploads, public.labels)
        global_batch = _aggregate(cfg, uploads, public.labels, round_no, trace)
        sharpened = LogitBatch(softmax_rows(global_batch.rows, cfg.era_temperature))

        for client, clf in zip(
            clients,
            _pmap(
                lambda c: distill(c.classifier, public.features, sharpened, digest_cfg),
                clients,
            ),
        ):
            client.classifier = clf
        accuracies, mean_loss = _evaluate_clients(clients, test)
        metrics.append(
            RoundMetrics(round_no, float(np.mean(accuracies)), mean_loss, accuracies)
        )
    return metrics


def _mean_parameters(classifiers) -> Classifier:
    dims = classifiers[0].layer_dims
    for clf in classifiers[1:]:
        if clf.layer_dims != dims:
            raise ArchitectureMismatch(f"{clf.layer_dims} vs {dims}")
    return replace(
        classifiers[0],
        w1=np.mean([c.w1 for c in classifiers], axis=0),
        b1=np.mean([c.b1 for c in classifiers], axis=0),
        w2=np.mean([c.w2 for c in classifiers], axis=0),
        b2=np.mean([c.b2 for c in classifiers], axis=0),
    )


def run_feddf(cfg: FederationConfig, dataset: Dataset, trace: RunTrace | None = None):
    """Parameter exchange with server-side ensemble distillation.

    Per round: clients train locally and upload parameters; the server
    averages them into a student, recomputes every client's logits on
    the public set, aggregates those (plain or robust), and distills the
    student on the softened aggregate with the KL loss before
    redistributing it.
    """
    shards, public, test = partition(
        dataset, cfg.clients, cfg.public_size, cfg.test_size, cfg.seed
    )
    clients, malicious_ids = _build_clients(
        cfg, shards, dataset.feature_dim, dataset.class_count
    )
    if trace is not None:
        trace.malicious_ids = malicious_ids
    if cfg.attack is not None and cfg.attack.kind is AttackKind.LOGIT_SHUFFLE:
        table = _prepare_shuffle_table(cfg, public)
        for client in clients:
            if client.is_malicious:
                client.attack_table = table
        if trace is not None:
            trace.shuffle_table = table

    global_clf = init_classifier(
        dataset.feature_dim, cfg.hidden_units, dataset.class_count, child_seed(cfg.seed, "global")
    )
    for client in clients:
        client.classifier = replace(
            client.classifier, w1=global_clf.w1, b1=global_clf.b1, w2=global_clf.w2, b2=global_clf.b2
        )

    local_cfg = TrainConfig(cfg.epochs_local, cfg.lr_local, cfg.batch_size, LossKind.CROSS_ENTROPY)

    metrics = []
    for round_no in range(1, cfg.rounds + 1):
        for client, clf in zip(
            clients,
            _pmap(
                lambda c: train_supervised(c.classifier, c.features, c.labels, local_cfg),
                clients,
            ),
        ):
            client.classifier = clf
        student = _mean_parameters([c.classifier for c in clients])
        student = replace(student, rng_seed=child_seed(cfg.seed, "server", round_no), train_calls=0)
        uploads = _pmap(lambda c: predict_logits(c.classifier, public.features), clients)
        # The public set is unlabeled in this scheme, so poisoned rows are
        # keyed by the malicious model's own predicted class.
        uploads = _poison_uploads(
            cfg, clients, uploads, lambda batch: batch.rows.argmax(axis=1)
        )
        _record_scores(trace, round_no, cfg, clients, uploads, public.labels)
        global_batch = _aggregate(cfg, uploads, public.labels, round_no, trace)
        server_cfg = TrainConfig(cfg.epochs_server, cfg.lr_server, cfg.batch_size, LossKind.KL)
        student = distill(student, public.features, global_batch, server_cfg)
        for client in clients:
            client.classifier = replace(
                client.classifier, w1=student.w1, b1=student.b1, w2=student.w2, b2=student.b2
            )
        accuracy, loss = evaluate(student, test.features, test.labels)
        metrics.append(RoundMetrics(round_no, accuracy, loss, (accuracy,) * cfg.clients))
    return metrics


_RUNNERS = {Scheme.FEDMD: run_fedmd, Scheme.DSFL: run_dsfl, Scheme.FEDDF: run_feddf}


def run_federation(cfg: FederationConfig, dataset: Dataset, trace: RunTrace | None = None):
    """Dispatch to the configured scheme's round loop."""
    return _RUNNERS[cfg.scheme](cfg, dataset, trace)
