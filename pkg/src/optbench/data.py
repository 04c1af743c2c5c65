"""MNIST IDX and CIFAR-10 binary readers, subsetting and minibatch order."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncatedFileError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32
N_CLASSES = 10


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # [n, c, h, w], values in [0, 1]
    labels: np.ndarray  # [n] int64
    name: str

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise FormatError("label outside 0..9")

    def __len__(self) -> int:
        return self.labels.shape[0]


def parse_idx_images(raw: bytes) -> np.ndarray:
    if len(raw) < 16:
        raise TruncatedFileError(f"IDX image header needs 16 bytes, file has {len(raw)}")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"bad IDX image magic 0x{magic:08x} (expected 0x{IDX_IMAGES_MAGIC:08x})")
    expected = 16 + n * rows * cols
    if len(raw) < expected:
        raise TruncatedFileError(f"IDX image file truncated: {len(raw)} bytes, expected {expected}")
    if len(raw) > expected:
        raise FormatError(f"IDX image file has {len(raw) - expected} trailing bytes")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, rows, cols)


def parse_idx_labels(raw: bytes) -> np.ndarray:
    if len(raw) < 8:
        raise TruncatedFileError(f"IDX label header needs 8 bytes, file has {len(raw)}")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"bad IDX label magic 0x{magic:08x} (expected 0x{IDX_LABELS_MAGIC:08x})")
    if len(raw) < 8 + n:
        raise TruncatedFileError(f"IDX label file truncated: {len(raw)} bytes, expected {8 + n}")
    if len(raw) > 8 + n:
        raise FormatError(f"IDX label file has {len(raw) - 8 - n} trailing bytes")
    return np.frombuffer(raw, dtype=np.uint8, offset=8)


def load_mnist_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    pixels = parse_idx_images(Path(images_path).read_bytes())
    labels = parse_idx_labels(Path(labels_path).read_bytes())
    images = (pixels.astype(np.float64) / 255.0)[:, None, :, :]
    return Dataset(images, labels.astype(np.int64), "mnist")


def parse_cifar10(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"CIFAR-10 file length {len(raw)} is not a multiple of {CIFAR_RECORD}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    return records[:, 1:].reshape(-1, 3, 32, 32), records[:, 0].astype(np.int64)


def load_cifar10_bin(path: str | Path) -> Dataset:
    pixels, labels = parse_cifar10(Path(path).read_bytes())
    return Dataset(pixels.astype(np.float64) / 255.0, labels, "cifar10")


def load_cifar10_batches(paths) -> Dataset:
    parts = [load_cifar10_bin(p) for p in paths]
    return Dataset(
        np.concatenate([d.images for d in parts]),
        np.concatenate([d.labels for d in parts]),
        "cifar10",
    )


def subset(dataset: Dataset, n: int | None, seed: int) -> Dataset:
    """First ``n`` samples after a seeded shuffle; ``None`` keeps everything (unshuffled)."""
    if n is None or n >= len(dataset):
        return dataset
    order = np.random.default_rng(seed).permutation(len(dataset))[:n]
    return Dataset(dataset.images[order], dataset.labels[order], dataset.name)


def batches(dataset: Dataset | int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Index slices covering a fresh permutation of the samples for ``(seed, epoch)``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = dataset if isinstance(dataset, int) else len(dataset)
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def encode_idx_images(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    return struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols) + pixels.tobytes()


def encode_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def encode_cifar10(pixels: np.ndarray, labels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, 3 * 32 * 32)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    return np.concatenate([labels, pixels], axis=1).tobytes()
