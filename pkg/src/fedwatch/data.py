"""Dataset sources and plumbing: synthetic blobs, IDX files, splits, shards."""
import struct
from dataclasses import dataclass

import numpy as np

from .rng import substream

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n, dim), int labels in [0, class_count)."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DataError("labels length must match feature rows")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DataError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.class_count)


def gen_blobs(class_count, dim, per_class, spread, seed) -> Dataset:
    """Isotropic Gaussian blobs, one seed-derived center per class.

    Centers are standard-normal points in R^dim, so with the default
    spread=0.1 classes are far apart and an MLP separates them easily.
    """
    if min(class_count, dim, per_class) < 1:
        raise DataError("class_count, dim and per_class must be positive")
    if spread < 0:
        raise DataError("spread must be >= 0")
    centers = substream(seed, "blob-centers").normal(0.0, 1.0, (class_count, dim))
    feats = []
    labels = []
    for c in range(class_count):
        noise = substream(seed, "blob-points", c).normal(0.0, 1.0, (per_class, dim))
        feats.append(centers[c] + spread * noise)
        labels.append(np.full(per_class, c, dtype=np.int64))
    return Dataset(np.vstack(feats), np.concatenate(labels), class_count)


def _read_header(buf: bytes, path, expected_magic, n_dims):
    want = 4 * (1 + n_dims)
    if len(buf) < want:
        raise DataError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", buf[:4])[0]
    if magic != expected_magic:
        raise DataError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    dims = struct.unpack(f">{n_dims}I", buf[4:want])
    return dims, buf[want:]


def load_idx(images_path, labels_path, class_count=None) -> Dataset:
    """Load an IDX image/label file pair; pixels are scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        img_buf = fh.read()
    with open(labels_path, "rb") as fh:
        lab_buf = fh.read()
    (n_img, rows, cols), img_payload = _read_header(
        img_buf, images_path, IDX_IMAGE_MAGIC, 3
    )
    (n_lab,), lab_payload = _read_header(lab_buf, labels_path, IDX_LABEL_MAGIC, 1)
    if n_img != n_lab:
        raise DataError(f"image count {n_img} != label count {n_lab}")
    if len(img_payload) != n_img * rows * cols:
        raise DataError(f"{images_path}: payload size mismatch")
    if len(lab_payload) != n_lab:
        raise DataError(f"{labels_path}: payload size mismatch")
    pixels = np.frombuffer(img_payload, dtype=np.uint8).reshape(n_img, rows * cols)
    labels = np.frombuffer(lab_payload, dtype=np.uint8).astype(np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    return Dataset(pixels.astype(np.float64) / 255.0, labels, class_count)


def split_holdout(data: Dataset, fraction, seed) -> tuple[Dataset, Dataset]:
    """Disjoint (train, holdout) split; a seeded shuffle decides membership."""
    if not 0.0 < fraction < 1.0:
        raise DataError("holdout fraction must be in (0, 1)")
    n = len(data)
    n_hold = int(round(n * fraction))
    if n_hold < 1 or n_hold >= n:
        raise DataError(f"fraction {fraction} yields an empty split for n={n}")
    order = substream(seed, "holdout").permutation(n)
    return data.subset(order[n_hold:]), data.subset(order[:n_hold])


def distribute(data: Dataset, k, mode, seed) -> list[Dataset]:
    """Per-worker datasets: identical copies or an equal-size partition."""
    if k < 1:
        raise DataError("worker count must be >= 1")
    if mode == "full_copy":
        return [data] * k
    if mode != "equal_shards":
        raise DataError(f"unknown distribution mode {mode!r}")
    n = len(data)
    if n < k:
        raise DataError(f"cannot shard {n} examples across {k} workers")
    order = substream(seed, "shards").permutation(n)
    base, extra = divmod(n, k)
    shards = []
    lo = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        shards.append(data.subset(np.sort(order[lo:lo + size])))
        lo += size
    return shards
