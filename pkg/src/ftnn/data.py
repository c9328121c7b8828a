"""Dataset loading and batching.

Supports the IDX byte format (FashionMNIST distribution, gzip accepted
transparently), the CIFAR10 binary format (3073-byte records), one-hot
encoding, seeded minibatching, and two synthetic generators used for
desk-scale runs: an 8-d two-Gaussian toy set and an image-shaped
template-plus-noise classification set.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "DataError",
    "load_idx",
    "load_cifar10",
    "one_hot",
    "one_hot_batch",
    "synthetic_toy",
    "synthetic_images",
    "minibatches",
    "write_idx",
    "write_cifar10",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073


class DataError(IOError):
    """Raised for malformed or inconsistent dataset files."""


@dataclass
class Dataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    labels: np.ndarray  # (N,) int labels
    split: str = "train"
    classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(
                f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.images)

    def subset(self, k):
        """First k samples per the stored order (files are never rewritten)."""
        k = min(k, len(self))
        return Dataset(self.images[:k], self.labels[:k], self.split, self.classes)


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path, split="train"):
    """Load an IDX image/label file pair as used by (Fashion)MNIST."""
    with _open_maybe_gzip(images_path) as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise DataError(f"truncated IDX header in {images_path}")
        magic, n, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise DataError(f"bad IDX image magic {magic:#010x} in {images_path}")
        raw = fh.read(n * rows * cols)
        if len(raw) != n * rows * cols:
            raise DataError(f"truncated IDX image payload in {images_path}")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n, 1, rows, cols)
    images = images.astype(np.float32) / 255.0

    with _open_maybe_gzip(labels_path) as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise DataError(f"truncated IDX header in {labels_path}")
        magic, n_labels = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise DataError(f"bad IDX label magic {magic:#010x} in {labels_path}")
        raw = fh.read(n_labels)
        if len(raw) != n_labels:
            raise DataError(f"truncated IDX label payload in {labels_path}")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)

    if n != n_labels:
        raise DataError(f"{n} images but {n_labels} labels between the IDX files")
    return Dataset(images, labels, split)


def load_cifar10(paths, split="train"):
    """Load one or more CIFAR10 binary batch files (3073-byte records)."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    all_images, all_labels = [], []
    for path in paths:
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) % CIFAR_RECORD_BYTES != 0:
            raise DataError(
                f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}")
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        all_labels.append(records[:, 0].astype(np.int64))
        all_images.append(records[:, 1:].reshape(-1, 3, 32, 32))
    images = np.concatenate(all_images).astype(np.float32) / 255.0
    labels = np.concatenate(all_labels)
    return Dataset(images, labels, split)


def one_hot(label, classes):
    """Unit basis vector for a single label."""
    if not 0 <= label < classes:
        raise ValueError(f"label {label} out of range [0, {classes})")
    vec = np.zeros(classes, dtype=np.float32)
    vec[label] = 1.0
    return vec


def one_hot_batch(labels, classes):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"labels outside [0, {classes})")
    out = np.zeros((len(labels), classes), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def synthetic_toy(n, seed=0):
    """8-d two-Gaussian binary set, linearly separable with margin >= 1."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    half = n // 2
    mean_a = np.full(8, 1.0)
    mean_b = np.full(8, -1.0)  # separation ||mean_a - mean_b|| >> 1
    xa = rng.normal(mean_a, 0.3, size=(n - half, 8))
    xb = rng.normal(mean_b, 0.3, size=(half, 8))
    x = np.concatenate([xa, xb]).astype(np.float32)
    y = np.concatenate([np.zeros(n - half), np.ones(half)]).astype(np.int64)
    order = rng.permutation(n)
    return Dataset(x[order].reshape(n, 1, 1, 8), y[order], "train", classes=2)


def synthetic_images(n, shape=(1, 28, 28), classes=10, seed=0, split="train",
                     signal=0.45, noise=0.35, label_noise=0.0, jitter=0):
    """Template-plus-noise image classification set.

    Each class owns a fixed smooth template drawn from a fixed seed;
    samples mix the template with per-sample uniform noise. `jitter`
    shifts each sample's template by a uniform offset in [-jitter, jitter]
    pixels per axis (wrapping), so classes live on a shift manifold rather
    than a single point. `label_noise` replaces that fraction of labels
    with uniform random classes, which controls how much a model can gain
    by memorizing training samples and therefore the train/test
    generalization gap.
    """
    c, h, w = shape
    template_rng = np.random.default_rng(12345)  # templates fixed across splits
    coarse = template_rng.random((classes, c, h // 4 + 1, w // 4 + 1))
    templates = np.stack([
        np.kron(coarse[k], np.ones((1, 4, 4)))[:, :h, :w] for k in range(classes)
    ]).astype(np.float32)

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, size=n)
    stamped = templates[labels]
    if jitter:
        shifts = rng.integers(-jitter, jitter + 1, size=(n, 2))
        stamped = np.stack([
            np.roll(img, tuple(s), axis=(1, 2)) for img, s in zip(stamped, shifts)
        ])
    imgs = signal * stamped + noise * rng.random((n, c, h, w), dtype=np.float32)
    imgs = np.clip(imgs, 0.0, 1.0).astype(np.float32)
    if label_noise:
        flip = rng.random(n) < label_noise
        labels = np.where(flip, rng.integers(0, classes, size=n), labels)
    return Dataset(imgs, labels.astype(np.int64), split, classes=classes)


def minibatches(dataset, m, epoch_seed):
    """Yield (images, one_hot_labels) batches after a seeded shuffle.

    The ragged tail is dropped, so each epoch yields floor(N / m) batches.
    """
    n = len(dataset)
    if m > n:
        raise ValueError(f"minibatch size {m} exceeds dataset size {n}")
    order = np.random.default_rng(epoch_seed).permutation(n)
    hot = one_hot_batch(dataset.labels, dataset.classes)
    for start in range(0, n - m + 1, m):
        idx = order[start:start + m]
        yield dataset.images[idx], hot[idx]


# -- fixture writers (used by tests and the synthetic CLI path) ----------


def write_idx(dataset, images_path, labels_path):
    """Write a Dataset back out in IDX byte format."""
    n, _, rows, cols = dataset.images.shape
    pixels = np.clip(np.round(dataset.images * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(dataset.labels.astype(np.uint8).tobytes())


def write_cifar10(dataset, path):
    """Write a Dataset as CIFAR10 binary records."""
    pixels = np.clip(np.round(dataset.images * 255.0), 0, 255).astype(np.uint8)
    n = len(dataset)
    records = np.empty((n, CIFAR_RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = dataset.labels.astype(np.uint8)
    records[:, 1:] = pixels.reshape(n, -1)
    with open(path, "wb") as fh:
        fh.write(records.tobytes())
