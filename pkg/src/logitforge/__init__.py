"""Deterministic simulator for logit poisoning and robust aggregation in
distillation-based federated learning."""

from .attack import (
    AttackConfig,
    AttackKind,
    ElementGrouping,
    ShuffleTable,
    apply_poison,
    build_shuffle_table,
    label_flip,
    maximize_entropy,
    naive_poison,
    shannon_entropy,
)
from .clustering import KMeansResult, SpectralResult, kmeans, spectral_cluster, symmetric_eigen
from .data import Dataset, gen_synthetic, load_idx
from .defense import (
    AggregationWeights,
    DefenseAudit,
    benign_centroid,
    error_cancellation_audit,
    robust_aggregate,
    temperature_softmax,
    user_class_representatives,
)
from .federation import (
    FederationConfig,
    RoundMetrics,
    RunTrace,
    Scheme,
    aggregate_mean,
    partition,
    run_dsfl,
    run_feddf,
    run_federation,
    run_fedmd,
)
from .logits import (
    DistanceMatrix,
    LogitBatch,
    LogitVector,
    RepresentativeVector,
    argmax_index,
    relevance_matrix,
    representative_vector,
    score_s1,
    score_s2,
)
from .model import (
    Classifier,
    LossKind,
    TrainConfig,
    distill,
    init_classifier,
    load_checkpoint,
    loss_value,
    predict_logits,
    save_checkpoint,
    train_supervised,
)

__version__ = "0.1.0"
