"""Patch extraction, per-patch contrast normalization and ZCA whitening.

A patch matrix is float64 with one flattened patch per row.  Flattening is
channel-planar, row-major within each channel, matching the image layout in
`pdl.datasets`; every module in the package shares this vectorization order.
"""

import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_BIAS = 10.0      # contrast-normalization variance bias, raw 0..255 scale
DEFAULT_EPSILON = 0.1    # ZCA regularizer for contrast-normalized patches


class InsufficientDataError(ValueError):
    """Fewer training patches than patch dimensions."""


def extract_dense(img, side, stride=1):
    """All side x side patches of one image at the given stride.

    Patches appear in row-major scan order of their top-left corners;
    count is floor((H-side)/stride + 1) * floor((W-side)/stride + 1).
    """
    channels, height, width = img.shape
    if side > height or side > width:
        raise ValueError(f"patch side {side} exceeds image {height}x{width}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    win = np.lib.stride_tricks.sliding_window_view(img, (side, side),
                                                   axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (c, nr, nc, side, side)
    n_rows, n_cols = win.shape[1], win.shape[2]
    patches = win.transpose(1, 2, 0, 3, 4).reshape(
        n_rows * n_cols, channels * side * side)
    return patches.astype(np.float64)


def patch_grid_shape(height, width, side, stride=1):
    """(rows, cols) of the dense patch grid."""
    return ((height - side) // stride + 1, (width - side) // stride + 1)


def sample_random(dataset, side, count, seed):
    """`count` patches at uniform (image, row, col) positions, with replacement.

    The draw comes from a single seeded PCG64 stream, so repeated calls with
    the same seed return the same matrix.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(dataset) == 0:
        raise ValueError("cannot sample patches from an empty dataset")
    n, channels, height, width = dataset.images.shape
    if side > height or side > width:
        raise ValueError(f"patch side {side} exceeds image {height}x{width}")
    rng = np.random.default_rng(seed)
    img_idx = rng.integers(0, n, size=count)
    rows = rng.integers(0, height - side + 1, size=count)
    cols = rng.integers(0, width - side + 1, size=count)
    offs = np.arange(side)
    gathered = dataset.images[
        img_idx[:, None, None, None],
        np.arange(channels)[None, :, None, None],
        (rows[:, None] + offs)[:, None, :, None],
        (cols[:, None] + offs)[:, None, None, :],
    ]
    return gathered.reshape(count, channels * side * side).astype(np.float64)


def contrast_normalize(patches, bias=DEFAULT_BIAS):
    """Per-row mean subtraction and variance normalization.

    Each row p becomes (p - mean(p)) / sqrt(var(p) + bias) with the
    population (1/d) variance; the bias keeps constant patches finite.
    """
    if bias <= 0:
        raise ValueError("bias must be > 0")
    mean = patches.mean(axis=1, keepdims=True)
    centered = patches - mean
    var = np.mean(centered ** 2, axis=1, keepdims=True)
    return centered / np.sqrt(var + bias)


@dataclass
class ZcaWhitener:
    """Per-dimension mean plus the symmetric map V (D + eps I)^(-1/2) V^T."""

    mean: np.ndarray       # (d,)
    transform: np.ndarray  # (d, d), symmetric
    epsilon: float

    @property
    def dim(self):
        return self.mean.shape[0]

    def inverse_transform_matrix(self):
        """V (D + eps I)^(1/2) V^T; used to map codes back to pixel space."""
        return np.linalg.pinv(self.transform, hermitian=True)


def fit_zca(patches, epsilon=DEFAULT_EPSILON):
    """Fit ZCA whitening on a patch matrix.

    Eigendecomposes the population covariance of the centered patches and
    builds V (D + eps I)^(-1/2) V^T.  Requires at least as many patches as
    dimensions; a covariance that is rank-deficient far beyond epsilon's
    repair only warns.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    n, d = patches.shape
    if n < d:
        raise InsufficientDataError(
            f"need at least {d} patches to whiten {d} dimensions, got {n}")
    mean = patches.mean(axis=0)
    centered = patches - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    # per-patch mean subtraction upstream always zeroes one direction (the
    # all-ones vector); only warn when the deficiency goes beyond that
    dead = int(np.sum(eigvals < 1e-12 * max(eigvals.max(), 0.0)))
    if dead > max(1, d // 20):
        warnings.warn(f"patch covariance has {dead}/{d} near-zero "
                      "eigenvalues; whitening relies on the epsilon "
                      "regularizer in those directions")
    scale = 1.0 / np.sqrt(np.maximum(eigvals, 0.0) + epsilon)
    transform = (eigvecs * scale) @ eigvecs.T
    transform = (transform + transform.T) / 2.0
    return ZcaWhitener(mean=mean, transform=transform, epsilon=epsilon)


def apply_zca(whitener, patches):
    """Whiten rows: p <- transform @ (p - mean)."""
    if patches.shape[1] != whitener.dim:
        raise ValueError(
            f"patch dim {patches.shape[1]} != whitener dim {whitener.dim}")
    # transform is symmetric, so row-vector application is a plain product
    return (patches - whitener.mean) @ whitener.transform
