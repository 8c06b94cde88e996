"""CIFAR-10 / STL-10 binary readers and bilinear resizing.

Images are kept channel-planar row-major throughout the package: a single
image is a uint8 array of shape (channels, height, width), a dataset stacks
them as (n, channels, height, width).  CIFAR-10 is stored in this layout
natively; STL-10 records are transposed once at parse time.
"""

from dataclasses import dataclass

import numpy as np

CIFAR_RECORD = 3073  # 1 label byte + 32*32*3 pixels
CIFAR_SIDE = 32
STL_SIDE = 96
STL_RECORD = STL_SIDE * STL_SIDE * 3
NUM_CLASSES = 10


class DatasetError(Exception):
    """Base class for dataset file problems."""


class MalformedFileError(DatasetError):
    """File length is not a whole number of records."""


class InvalidLabelError(DatasetError):
    """A label byte is outside the valid class range."""


class InconsistencyError(DatasetError):
    """Image and label files disagree on the number of records."""


@dataclass
class LabeledDataset:
    """Raw images plus class labels for one split."""

    images: np.ndarray  # uint8, (n, channels, height, width)
    labels: np.ndarray  # int64, (n,)
    num_classes: int
    split_tag: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise InconsistencyError(
                f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.images)


def load_cifar10(paths, split):
    """Parse CIFAR-10 batch files (3073-byte records) into a dataset.

    Each record is one label byte followed by 1024 R, 1024 G and 1024 B
    bytes, row-major within each plane.  Records are returned in file
    order across `paths`.
    """
    images = []
    labels = []
    for path in paths:
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) % CIFAR_RECORD != 0:
            offset = (len(raw) // CIFAR_RECORD) * CIFAR_RECORD
            raise MalformedFileError(
                f"{path}: length {len(raw)} is not a multiple of "
                f"{CIFAR_RECORD}; partial record begins at byte {offset}")
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        batch_labels = arr[:, 0]
        bad = np.nonzero(batch_labels >= NUM_CLASSES)[0]
        if bad.size:
            raise InvalidLabelError(
                f"{path}: record {bad[0]} has label {batch_labels[bad[0]]} "
                f">= {NUM_CLASSES}")
        images.append(arr[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE))
        labels.append(batch_labels.astype(np.int64))
    return LabeledDataset(
        images=np.concatenate(images) if images else
        np.empty((0, 3, CIFAR_SIDE, CIFAR_SIDE), np.uint8),
        labels=np.concatenate(labels) if labels else np.empty(0, np.int64),
        num_classes=NUM_CLASSES,
        split_tag=split,
    )


def serialize_cifar10(dataset):
    """Inverse of load_cifar10 for a single batch: dataset -> bytes."""
    n = len(dataset)
    out = np.empty((n, CIFAR_RECORD), dtype=np.uint8)
    out[:, 0] = dataset.labels
    out[:, 1:] = dataset.images.reshape(n, -1)
    return out.tobytes()


def load_stl10(image_path, label_path, split="train"):
    """Parse an STL-10 image/label file pair.

    Image records are 96x96x3 with column-major planes; the label file
    holds one 1-indexed byte per image.  Output images are converted to
    the package's channel-planar row-major layout and labels to 0-indexed.
    """
    with open(image_path, "rb") as fh:
        raw = fh.read()
    if len(raw) % STL_RECORD != 0:
        offset = (len(raw) // STL_RECORD) * STL_RECORD
        raise MalformedFileError(
            f"{image_path}: length {len(raw)} is not a multiple of "
            f"{STL_RECORD}; partial record begins at byte {offset}")
    n_images = len(raw) // STL_RECORD
    with open(label_path, "rb") as fh:
        raw_labels = fh.read()
    if len(raw_labels) != n_images:
        raise InconsistencyError(
            f"{image_path} holds {n_images} images but {label_path} holds "
            f"{len(raw_labels)} labels")
    labels = np.frombuffer(raw_labels, dtype=np.uint8)
    bad = np.nonzero((labels < 1) | (labels > NUM_CLASSES))[0]
    if bad.size:
        raise InvalidLabelError(
            f"{label_path}: record {bad[0]} has 1-indexed label "
            f"{labels[bad[0]]} outside 1..{NUM_CLASSES}")
    planes = np.frombuffer(raw, dtype=np.uint8).reshape(
        n_images, 3, STL_SIDE, STL_SIDE)
    # column-major within each plane: axis -2 indexes columns
    images = np.ascontiguousarray(planes.swapaxes(-1, -2))
    return LabeledDataset(
        images=images,
        labels=labels.astype(np.int64) - 1,
        num_classes=NUM_CLASSES,
        split_tag=split,
    )


def resize_bilinear(img, new_width, new_height):
    """Bilinear resize of one channel-planar uint8 image.

    Sample positions use the half-pixel-center convention
    (src = (dst + 0.5) * scale - 0.5, clamped to the source grid) and the
    interpolated values are rounded half away from zero, then clamped to
    [0, 255].  Documented so results reproduce bit-for-bit.
    """
    if new_width < 1 or new_height < 1:
        raise ValueError("resize dimensions must be >= 1")
    channels, height, width = img.shape

    def grid(n_src, n_dst):
        pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_src - 1)
        frac = pos - lo
        return lo, hi, frac

    y0, y1, fy = grid(height, new_height)
    x0, x1, fx = grid(width, new_width)
    src = img.astype(np.float64)
    out = np.empty((channels, new_height, new_width))
    for c in range(channels):
        top = src[c][y0][:, x0] * (1 - fx) + src[c][y0][:, x1] * fx
        bot = src[c][y1][:, x0] * (1 - fx) + src[c][y1][:, x1] * fx
        out[c] = top * (1 - fy[:, None]) + bot * fy[:, None]
    # round half away from zero (values are non-negative here)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def resize_dataset(dataset, new_width, new_height):
    """Resize every image in a dataset (used for the STL 96->32 protocol)."""
    resized = np.stack([resize_bilinear(im, new_width, new_height)
                        for im in dataset.images])
    return LabeledDataset(resized, dataset.labels, dataset.num_classes,
                          dataset.split_tag)


def subsample(dataset, count, seed):
    """Deterministic without-replacement subsample of a dataset."""
    if count >= len(dataset):
        return dataset
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(dataset), size=count, replace=False))
    return LabeledDataset(dataset.images[idx], dataset.labels[idx],
                          dataset.num_classes, dataset.split_tag)
