"""Datasets: synthetic generators, IDX image files, splitting, normalization."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DataError, FormatError

SPLITS = ("train", "validation", "test")

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray  # (N, D) float32
    labels: np.ndarray  # (N,) ints in [0, class_count)
    class_count: int
    split_assignment: np.ndarray  # (N,) strings from SPLITS

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.split_assignment.shape != (n,):
            raise DataError("features, labels and split assignment disagree on N")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataError(f"labels out of range [0, {self.class_count})")
        if not np.all(np.isfinite(self.features)):
            raise DataError("non-finite feature values")

    def indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ConfigurationError(f"unknown split {split!r}")
        return np.flatnonzero(self.split_assignment == split)

    def arrays(self, split: str) -> "tuple[np.ndarray, np.ndarray]":
        idx = self.indices(split)
        return self.features[idx], self.labels[idx]


def _all_train(n: int) -> np.ndarray:
    return np.full(n, "train", dtype="<U10")


def generate_two_moons(n_samples: int, noise_sigma: float, seed: int) -> Dataset:
    """Two interleaved half-circles with Gaussian jitter.

    Class 0 sits on the upper unit half-circle, class 1 on the lower one
    shifted right and up; counts differ by at most one.
    """
    if n_samples < 10:
        raise ConfigurationError(f"n_samples must be >= 10, got {n_samples}")
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be >= 0")
    n_outer = n_samples // 2
    n_inner = n_samples - n_outer
    t_outer = np.linspace(0.0, np.pi, n_outer)
    t_inner = np.linspace(0.0, np.pi, n_inner)
    x = np.concatenate([np.cos(t_outer), 1.0 - np.cos(t_inner)])
    y = np.concatenate([np.sin(t_outer), 0.5 - np.sin(t_inner)])
    features = np.stack([x, y], axis=1)
    rng = np.random.default_rng(seed)
    features = features + rng.normal(0.0, noise_sigma, size=features.shape)
    labels = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    return Dataset(features.astype(np.float32), labels, 2, _all_train(n_samples))


def generate_blobs(
    n_samples: int, centers: "list[tuple[float, ...]]", sigma: float, seed: int
) -> Dataset:
    """Isotropic Gaussian clusters, one class per center, round-robin counts."""
    if len(centers) < 2:
        raise ConfigurationError(f"need at least 2 centers, got {len(centers)}")
    if n_samples < len(centers):
        raise ConfigurationError("fewer samples than centers")
    if sigma < 0:
        raise ConfigurationError("sigma must be >= 0")
    dims = {len(c) for c in centers}
    if len(dims) != 1:
        raise ConfigurationError("centers must share a dimension")
    labels = np.arange(n_samples, dtype=np.int64) % len(centers)
    center_array = np.asarray(centers, dtype=np.float64)
    rng = np.random.default_rng(seed)
    features = center_array[labels] + rng.normal(0.0, sigma, size=(n_samples, dims.pop()))
    return Dataset(features.astype(np.float32), labels, len(centers), _all_train(n_samples))


def _read_exact(data: bytes, offset: int, count: int, what: str) -> "tuple[bytes, int]":
    if offset + count > len(data):
        raise FormatError(f"truncated IDX file while reading {what}", offset)
    return data[offset : offset + count], offset + count


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label file pair (big-endian headers).

    Features are flattened row-major and scaled from byte range to [0, 1].
    """
    with open(images_path, "rb") as fh:
        img = fh.read()
    with open(labels_path, "rb") as fh:
        lab = fh.read()

    raw, pos = _read_exact(img, 0, 16, "image header")
    magic, n_images, rows, cols = struct.unpack(">IIII", raw)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}", 0)
    pixels, pos = _read_exact(img, pos, n_images * rows * cols, "pixels")
    if pos != len(img):
        raise FormatError(f"{len(img) - pos} trailing bytes in image file", pos)

    raw, lpos = _read_exact(lab, 0, 8, "label header")
    magic, n_labels = struct.unpack(">II", raw)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}", 0)
    label_bytes, lpos = _read_exact(lab, lpos, n_labels, "labels")
    if lpos != len(lab):
        raise FormatError(f"{len(lab) - lpos} trailing bytes in label file", lpos)

    if n_images != n_labels:
        raise FormatError(f"{n_images} images but {n_labels} labels", 4)

    features = np.frombuffer(pixels, dtype=np.uint8).reshape(n_images, rows * cols)
    features = (features / 255.0).astype(np.float32)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    class_count = int(labels.max()) + 1 if n_images else 1
    return Dataset(features, labels, max(class_count, 2), _all_train(n_images))


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images of shape (N, rows, cols) as an IDX file."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def split(dataset: Dataset, fractions: "tuple[float, float, float]", seed: int) -> Dataset:
    """Assign every sample to train/validation/test, stratified per class.

    Class indices are shuffled with the seeded generator, then counts per
    split come from the largest-remainder rounding of fraction * class size.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigurationError(f"need 3 positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions must sum to 1, got {sum(fractions)}")

    rng = np.random.default_rng(seed)
    assignment = np.empty(len(dataset.labels), dtype="<U10")
    for cls in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == cls)
        if len(members) < len(SPLITS):
            raise DataError(
                f"class {cls} has {len(members)} samples, fewer than {len(SPLITS)} splits"
            )
        members = members[rng.permutation(len(members))]
        counts = [int(f * len(members)) for f in fractions]
        remainders = [f * len(members) - c for f, c in zip(fractions, counts)]
        leftover = len(members) - sum(counts)
        for slot in sorted(range(3), key=lambda s: (-remainders[s], s))[:leftover]:
            counts[slot] += 1
        cursor = 0
        for name, count in zip(SPLITS, counts):
            assignment[members[cursor : cursor + count]] = name
            cursor += count
    return replace(dataset, split_assignment=assignment)


def normalize(dataset: Dataset) -> Dataset:
    """Standardize every feature with the train split's mean and stdev.

    Zero-variance features map to 0 everywhere instead of dividing by zero.
    """
    train_features, _ = dataset.arrays("train")
    if len(train_features) == 0:
        raise DataError("train split is empty")
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    safe = np.where(std > 0, std, 1.0).astype(np.float32)
    centered = (dataset.features - mean.astype(np.float32)) / safe
    centered[:, std == 0] = 0.0
    return replace(dataset, features=centered.astype(np.float32))


def export_csv(dataset: Dataset, path) -> None:
    """Dump the dataset as CSV with header f0..fD-1,label,split."""
    d = dataset.features.shape[1]
    header = ",".join([f"f{i}" for i in range(d)] + ["label", "split"])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for row, label, tag in zip(dataset.features, dataset.labels, dataset.split_assignment):
            cells = [format(float(v), ".9g") for v in row]
            fh.write(",".join(cells + [str(int(label)), str(tag)]) + "\n")
