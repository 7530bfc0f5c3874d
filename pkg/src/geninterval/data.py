"""Datasets: MNIST/CIFAR-10 binary loaders, two-moons, and label/resolution transforms."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073

DATA_DIR_ENV = "GENINTERVAL_DATA_DIR"

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILES = ["test_batch.bin"]


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "dataset"

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise ValueError("inputs must be an (N, d) matrix")
        if y.shape != (x.shape[0],):
            raise ValueError(f"{y.shape[0]} labels for {x.shape[0]} inputs")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs contain non-finite values")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def class_indices(self, c):
        return np.flatnonzero(self.labels == c)

    def take(self, idx, name=None):
        idx = np.asarray(idx)
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes, name or self.name)

    def with_labels(self, labels, name=None):
        return Dataset(self.inputs, labels, self.num_classes, name or self.name)


@dataclass(frozen=True)
class LabelAssignment:
    original: np.ndarray
    assigned: np.ndarray
    fraction: float
    seed: int
    resampled: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def apply(self, ds):
        if not np.array_equal(ds.labels, self.original):
            raise ValueError("assignment was drawn for a different label sequence")
        tag = f"{ds.name}+random{self.fraction:g}" if self.fraction > 0 else ds.name
        return ds.with_labels(self.assigned, tag)


def data_root(path=None):
    """Resolve a dataset root: explicit path, else $GENINTERVAL_DATA_DIR, else ./data."""
    if path:
        return Path(path)
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def _read_idx(path, magic, ndim):
    raw = Path(path).read_bytes()
    header = 4 * (1 + ndim)
    if len(raw) < header:
        raise DataFormatError(f"{path}: truncated header")
    got, *dims = struct.unpack(f">{1 + ndim}I", raw[:header])
    if got != magic:
        raise DataFormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    expected = int(np.prod(dims))
    payload = len(raw) - header
    if payload != expected:
        raise DataFormatError(f"{path}: payload has {payload} bytes, header implies {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist_idx(images_path, labels_path, name="mnist"):
    """Load an IDX image/label pair; pixels become byte/255."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise DataFormatError("MNIST label byte > 9")
    x = images.reshape(images.shape[0], -1) / 255.0
    return Dataset(x, labels, 10, name)


def load_mnist(root=None, split="train"):
    root = data_root(root)
    for sub in (root / "mnist", root):
        img, lab = (sub / f for f in MNIST_FILES[split])
        if img.exists() and lab.exists():
            return load_mnist_idx(img, lab, name=f"mnist-{split}")
    raise FileNotFoundError(f"MNIST {split} IDX files not found under {root}")


def load_cifar10(batch_paths, name="cifar10"):
    """Concatenate CIFAR-10 binary batches (1 label byte + 3072 channel-planar pixels)."""
    xs, ys = [], []
    for p in batch_paths:
        raw = np.fromfile(p, dtype=np.uint8)
        if raw.size == 0 or raw.size % CIFAR_RECORD:
            raise DataFormatError(f"{p}: length {raw.size} is not a multiple of {CIFAR_RECORD}")
        rec = raw.reshape(-1, CIFAR_RECORD)
        if rec[:, 0].max() >= 10:
            raise DataFormatError(f"{p}: label byte >= 10")
        ys.append(rec[:, 0])
        xs.append(rec[:, 1:] / 255.0)
    if not xs:
        raise ValueError("no CIFAR-10 batch files given")
    return Dataset(np.concatenate(xs), np.concatenate(ys), 10, name)


def load_cifar(root=None, split="train"):
    root = data_root(root)
    files = CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES
    for sub in (root / "cifar-10-batches-bin", root / "cifar10", root):
        paths = [sub / f for f in files]
        if all(p.exists() for p in paths):
            return load_cifar10(paths, name=f"cifar10-{split}")
    raise FileNotFoundError(f"CIFAR-10 {split} batches not found under {root}")


def two_moons(n_total=400, noise_sd=0.1, seed=0):
    """Two interleaved half-circles, ``n_total/2`` points each.

    Class 0 lies on (cos a, sin a), class 1 on (1 - cos a, 0.5 - sin a),
    a ~ U[0, pi], plus isotropic Gaussian noise.
    """
    if n_total < 4 or n_total % 2:
        raise ValueError("n_total must be even and >= 4")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    half = n_total // 2
    a0 = rng.uniform(0.0, np.pi, half)
    a1 = rng.uniform(0.0, np.pi, half)
    upper = np.column_stack([np.cos(a0), np.sin(a0)])
    lower = np.column_stack([1.0 - np.cos(a1), 0.5 - np.sin(a1)])
    x = np.vstack([upper, lower])
    if noise_sd > 0:
        x = x + rng.normal(0.0, noise_sd, x.shape)
    y = np.repeat([0, 1], half)
    return Dataset(x, y, 2, "two_moons")


def split(ds, n_first, seed):
    """Random disjoint split into ``n_first`` and ``len(ds) - n_first`` samples."""
    if not 0 < n_first < len(ds):
        raise ValueError("n_first must leave both parts non-empty")
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.take(np.sort(perm[:n_first])), ds.take(np.sort(perm[n_first:]))


def subsample_per_class(ds, per_class, seed):
    """Keep exactly ``per_class`` samples of each class (original order kept)."""
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(ds.num_classes):
        idx = ds.class_indices(c)
        if idx.size < per_class:
            raise ValueError(f"class {c} has {idx.size} samples, need {per_class}")
        keep.append(rng.choice(idx, size=per_class, replace=False))
    keep = np.sort(np.concatenate(keep))
    return ds.take(keep, f"{ds.name}-{per_class}pc")


def randomize_labels(ds, fraction, seed):
    """Resample the labels of floor(fraction * N) random samples uniformly over classes.

    A resampled label may coincide with the original one.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = len(ds)
    m = int(np.floor(fraction * n))
    chosen = np.sort(rng.choice(n, size=m, replace=False)) if m else np.empty(0, dtype=np.int64)
    assigned = ds.labels.copy()
    assigned[chosen] = rng.integers(0, ds.num_classes, size=m)
    return LabelAssignment(ds.labels.copy(), assigned, float(fraction), int(seed), chosen)


def _pool(x, factor):
    n, side = x.shape[0], x.shape[1]
    s = side // factor
    return x.reshape(n, s, factor, s, factor).mean(axis=(2, 4))


def downsample(ds, factor):
    """Non-overlapping ``factor x factor`` average pooling of square images.

    Power-of-two factors are applied as repeated 2x2 pools, so pooling by 2
    twice is bit-identical to pooling by 4.
    """
    if factor == 1:
        return ds
    side = int(round(np.sqrt(ds.dim)))
    if side * side != ds.dim:
        raise ValueError(f"dimension {ds.dim} is not a square image")
    if factor < 1 or side % factor:
        raise ValueError(f"side {side} not divisible by factor {factor}")
    x = ds.inputs.reshape(len(ds), side, side)
    rest = factor
    while rest % 2 == 0:
        x = _pool(x, 2)
        rest //= 2
    if rest > 1:
        x = _pool(x, rest)
    s = side // factor
    return Dataset(x.reshape(len(ds), s * s), ds.labels, ds.num_classes, f"{ds.name}-{s}x{s}")
