"""Datasets: the CIFAR binary record format and a synthetic spectral task."""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

CIFAR_PIXELS = 32 * 32 * 3
CIFAR_VARIANTS = {
    # variant: (label bytes per record, classes, train files, test files)
    "cifar10": (1, 10, [f"data_batch_{i}.bin" for i in range(1, 6)], ["test_batch.bin"]),
    "cifar100": (2, 100, ["train.bin"], ["test.bin"]),
}


class DatasetFormatError(ValueError):
    pass


@dataclass
class DatasetSplit:
    images: np.ndarray  # (n, 32, 32, 3) in [0, 1]
    labels: np.ndarray  # (n,) int64
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{self.name}: {len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"{self.name}: labels outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx, name: str | None = None) -> "DatasetSplit":
        return DatasetSplit(self.images[idx], self.labels[idx], self.num_classes, name or self.name)


def load_cifar(path: str | os.PathLike, variant: str = "cifar10", limit: int | None = None) -> DatasetSplit:
    """Read a CIFAR binary batch file.

    CIFAR-10 records are 1 label byte + 3072 pixel bytes (R, G, B planes,
    row-major); CIFAR-100 records carry a coarse then a fine label byte and
    the fine label is used. Pixels are scaled to [0, 1].
    """
    if variant not in CIFAR_VARIANTS:
        raise ValueError(f"unknown CIFAR variant {variant!r}; expected cifar10 or cifar100")
    label_bytes, n_classes, _, _ = CIFAR_VARIANTS[variant]
    record = label_bytes + CIFAR_PIXELS
    data = Path(path).read_bytes()
    if len(data) % record:
        raise DatasetFormatError(
            f"{path}: length {len(data)} is not a multiple of the {record}-byte {variant} record (remainder {len(data) % record})")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
    if limit is not None:
        raw = raw[:limit]
    labels = raw[:, label_bytes - 1].astype(np.int64)
    bad = np.flatnonzero(labels >= n_classes)
    if bad.size:
        raise DatasetFormatError(f"{path}: record {bad[0]} has label {labels[bad[0]]} >= {n_classes}")
    images = raw[:, label_bytes:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).astype(np.float32) / 255.0
    return DatasetSplit(np.ascontiguousarray(images), labels, n_classes, Path(path).name)


def load_cifar_dir(directory, variant: str = "cifar10", split: str = "train", limit: int | None = None) -> DatasetSplit:
    """Concatenate the standard batch files of ``directory`` up to ``limit`` records."""
    _, n_classes, train_files, test_files = CIFAR_VARIANTS[variant]
    parts, remaining = [], limit
    for fname in train_files if split == "train" else test_files:
        if remaining is not None and remaining <= 0:
            break
        part = load_cifar(Path(directory) / fname, variant, remaining)
        parts.append(part)
        if remaining is not None:
            remaining -= len(part)
    return DatasetSplit(np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts]),
                        n_classes, f"{variant}-{split}")


@lru_cache(maxsize=None)
def spectral_frequencies(size: int = 32) -> tuple[tuple[int, int], ...]:
    """Distinct (u, v) pairs for the synthetic classes, lowest radius first.

    One representative per +-(u, v) pair; Nyquist and DC excluded.
    """
    half = size // 2
    pairs = [(u, v) for u in range(0, half) for v in range(-half + 1, half)
             if (u > 0 or v > 0)]
    return tuple(sorted(pairs, key=lambda p: (p[0] ** 2 + p[1] ** 2, p[0], p[1])))


def spectral_pattern(u: int, v: int, size: int = 32) -> np.ndarray:
    """cos(2 pi (u x + v y) / size) with x along width, y along height."""
    y, x = np.mgrid[0:size, 0:size]
    return np.cos(2 * np.pi * (u * x + v * y) / size)


def synth_spectral_dataset(n_per_class: int, classes: int, noise: float, seed: int = 0,
                           size: int = 32) -> DatasetSplit:
    """Each class is one 2-D cosine with its own integer frequency, plus
    Gaussian noise, mapped to [0, 1] by (v + 1) / 2 and clipped, replicated
    over three channels. Samples are shuffled."""
    freqs = spectral_frequencies(size)
    if not 1 <= classes <= len(freqs):
        raise ValueError(f"classes must lie in [1, {len(freqs)}] for a {size}x{size} grid, got {classes}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(classes), n_per_class)
    patterns = np.stack([spectral_pattern(u, v, size) for u, v in freqs[:classes]])
    gray = patterns[labels] + noise * rng.standard_normal((labels.size, size, size))
    gray = np.clip((gray + 1.0) / 2.0, 0.0, 1.0)
    images = np.repeat(gray[..., None], 3, axis=-1).astype(np.float32)
    order = rng.permutation(labels.size)
    return DatasetSplit(images[order], labels[order].astype(np.int64), classes, "synthetic")


def split_fractions(ds: DatasetSplit, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> list[DatasetSplit]:
    """Shuffle with ``seed`` and cut into consecutive parts (train / val / test)."""
    n = len(ds)
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.floor(np.cumsum(fractions) * n + 1e-9).astype(int)
    bounds[-1] = n
    names = ["train", "val", "test"][: len(fractions)]
    out, start = [], 0
    for name, end in zip(names, bounds):
        out.append(ds.subset(order[start:end], name))
        start = end
    return out
