"""Dataset container, IDX ingestion, synthetic generation, and CSV dumps."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, CountMismatch, DimensionMismatch, TruncatedFile
from .logits import LogitBatch

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix scaled to [0, 1] with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatch("one label per sample required")
        if features.size and (features.min() < 0.0 or features.max() > 1.0):
            raise ValueError("features must lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError("labels outside [0, class_count)")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(self.features[indices], self.labels[indices], self.class_count)


def _read_be32(blob: bytes, offset: int, path) -> int:
    if len(blob) < offset + 4:
        raise TruncatedFile(f"{path}: header ends early")
    return struct.unpack(">I", blob[offset : offset + 4])[0]


def load_idx(image_path, label_path) -> Dataset:
    """Parse big-endian IDX image/label files into a Dataset.

    Pixel bytes are scaled to [0, 1] by /255 and flattened row-major.

    Raises:
        BadMagic: Wrong magic number in either file.
        CountMismatch: Image and label counts differ.
        TruncatedFile: Either file ends before its declared payload.
    """
    with open(image_path, "rb") as fh:
        image_blob = fh.read()
    with open(label_path, "rb") as fh:
        label_blob = fh.read()

    if _read_be32(image_blob, 0, image_path) != IDX_IMAGE_MAGIC:
        raise BadMagic(f"{image_path}: expected image magic {IDX_IMAGE_MAGIC:#010x}")
    count = _read_be32(image_blob, 4, image_path)
    rows = _read_be32(image_blob, 8, image_path)
    cols = _read_be32(image_blob, 12, image_path)
    payload = count * rows * cols
    if len(image_blob) < 16 + payload:
        raise TruncatedFile(f"{image_path}: expected {payload} pixel bytes")
    pixels = np.frombuffer(image_blob, dtype=np.uint8, count=payload, offset=16)

    if _read_be32(label_blob, 0, label_path) != IDX_LABEL_MAGIC:
        raise BadMagic(f"{label_path}: expected label magic {IDX_LABEL_MAGIC:#010x}")
    label_count = _read_be32(label_blob, 4, label_path)
    if label_count != count:
        raise CountMismatch(f"{count} images but {label_count} labels")
    if len(label_blob) < 8 + label_count:
        raise TruncatedFile(f"{label_path}: expected {label_count} label bytes")
    labels = np.frombuffer(label_blob, dtype=np.uint8, count=label_count, offset=8)

    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    return Dataset(features, labels, int(labels.max()) + 1 if labels.size else 1)


def gen_synthetic(
    class_count: int, per_class: int, feature_dim: int, spread: float, seed: int
) -> Dataset:
    """Isotropic Gaussian blob per class, clamped to [0, 1].

    Class centers are the vertices of a unit simplex scaled into the
    feature cube, with mirror-pair blur: class c elevates coordinate c
    fully and its mirror sibling's coordinate partially, so paired
    classes share features the way similar digit shapes do and only
    class_count of the dimensions carry signal.  When the feature
    dimension is too small for that, centers are drawn uniformly at
    random instead.
    """
    if class_count < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("need at least 1 sample per class")
    rng = np.random.default_rng([seed, 0xDA7A])
    if feature_dim >= class_count:
        centers = np.full((class_count, feature_dim), 0.15)
        diag = np.arange(class_count)
        mirror = class_count - 1 - diag
        centers[diag, diag] = 0.85
        shared = mirror != diag
        centers[diag[shared], mirror[shared]] += 0.2
    else:
        centers = rng.uniform(0.2, 0.8, (class_count, feature_dim))
    features = np.empty((class_count * per_class, feature_dim))
    labels = np.empty(class_count * per_class, dtype=np.int64)
    for class_id in range(class_count):
        start = class_id * per_class
        noise = rng.normal(0.0, spread, (per_class, feature_dim)) if spread > 0 else 0.0
        features[start : start + per_class] = centers[class_id] + noise
        labels[start : start + per_class] = class_id
    return Dataset(np.clip(features, 0.0, 1.0), labels, class_count)


def write_dataset_csv(dataset: Dataset, path):
    """One row per sample: label first, then full-precision features."""
    with open(path, "w", newline="") as fh:
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(",".join([str(int(label))] + [repr(v) for v in row]))
            fh.write("\n")


def read_dataset_csv(path, class_count: int | None = None) -> Dataset:
    labels = []
    rows = []
    with open(path) as fh:
        for line in fh:
            parts = line.rstrip("\n").split(",")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    labels = np.array(labels, dtype=np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1
    return Dataset(np.array(rows), labels, class_count)


def write_logit_csv(batch: LogitBatch, path):
    """One row per sample, one column per class, '.' decimal, no header."""
    with open(path, "w", newline="") as fh:
        for row in batch.rows:
            fh.write(",".join(repr(v) for v in row))
            fh.write("\n")


def read_logit_csv(path) -> LogitBatch:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return LogitBatch(np.array(rows))
