"""Threshold encoding and spatial pooling of dictionary activations.

A pooled feature vector is laid out cell-major: pooling cells in row-major
order, with the per-code activations contiguous inside each cell, giving
length dict_size * grid_rows * grid_cols.  Cells partition the image evenly,
the last row/column of cells absorbing any remainder, and each dense patch
belongs to the cell containing its center pixel.
"""

from dataclasses import dataclass

import numpy as np

from pdl import kernels
from pdl.patches import (DEFAULT_BIAS, apply_zca, contrast_normalize,
                         extract_dense)

POOL_OPS = ("avg", "max")


@dataclass
class EncoderConfig:
    alpha: float = 0.25
    pool_grid: tuple = (2, 2)
    pool_op: str = "avg"
    stride: int = 1

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.pool_grid[0] < 1 or self.pool_grid[1] < 1:
            raise ValueError("pool grid dimensions must be >= 1")
        if self.pool_op not in POOL_OPS:
            raise ValueError(f"pool_op must be one of {POOL_OPS}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def n_cells(self):
        return self.pool_grid[0] * self.pool_grid[1]


def encode_patch(dictionary, patch, alpha):
    """Activations max(0, <d_k, p> - alpha) of one whitened patch."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape[0] != dictionary.dim:
        raise ValueError(
            f"patch dim {patch.shape[0]} != code dim {dictionary.dim}")
    return np.maximum(dictionary.codes @ patch - alpha, 0.0)


def encode_patches(dictionary, whitened, alpha):
    """Row-wise threshold encoding of an already-whitened patch matrix."""
    if whitened.shape[1] != dictionary.dim:
        raise ValueError(
            f"patch dim {whitened.shape[1]} != code dim {dictionary.dim}")
    return np.maximum(whitened @ dictionary.codes.T - alpha, 0.0)


def patch_cell_index(height, width, side, stride, pool_grid):
    """Pooling cell of every dense patch, row-major over the patch grid.

    A patch with top-left (r, c) has center (r + side/2, c + side/2); the
    image is split into an even pool_grid with the remainder absorbed by
    the last cells.
    """
    grid_rows, grid_cols = pool_grid
    cell_h = max(height // grid_rows, 1)
    cell_w = max(width // grid_cols, 1)
    n_rows = (height - side) // stride + 1
    n_cols = (width - side) // stride + 1
    centers_r = np.arange(n_rows) * stride + side / 2.0
    centers_c = np.arange(n_cols) * stride + side / 2.0
    bin_r = np.minimum((centers_r // cell_h).astype(np.int64), grid_rows - 1)
    bin_c = np.minimum((centers_c // cell_w).astype(np.int64), grid_cols - 1)
    return (bin_r[:, None] * grid_cols + bin_c[None, :]).reshape(-1)


def _encode_basis(dictionary, whitener, alpha):
    """Fold whitening into the dictionary: basis (d, m) and per-code offset."""
    basis = whitener.transform @ dictionary.codes.T
    offset = whitener.mean @ basis + alpha
    return np.ascontiguousarray(basis), offset


def encode_and_pool(dictionary, img, cfg, whitener, bias=DEFAULT_BIAS):
    """Pooled feature vector of one raw image.

    Dense patches at cfg.stride are contrast-normalized with `bias`,
    whitened, threshold-encoded against the dictionary and pooled
    (cfg.pool_op) per pooling cell; empty cells contribute zeros.
    """
    side = dictionary.patch_side
    channels, height, width = img.shape
    if side > height or side > width:
        raise ValueError(f"image {height}x{width} smaller than patch "
                         f"side {side}")
    basis, offset = _encode_basis(dictionary, whitener, cfg.alpha)
    cell_idx = patch_cell_index(height, width, side, cfg.stride,
                                cfg.pool_grid)
    return kernels.encode_pool_image(
        np.ascontiguousarray(img, dtype=np.float64), basis, offset,
        side, cfg.stride, bias, cell_idx, cfg.n_cells,
        cfg.pool_op == "max")


def encode_and_pool_images(dictionary, images, cfg, whitener,
                           bias=DEFAULT_BIAS, backend=None):
    """Pooled features of an image stack: (n, dict_size * n_cells).

    The whitened dictionary basis and the patch-to-cell table are built
    once and reused across images.
    """
    impl = kernels.get_backend(backend)
    n, channels, height, width = images.shape
    side = dictionary.patch_side
    if side > height or side > width:
        raise ValueError(f"image {height}x{width} smaller than patch "
                         f"side {side}")
    basis, offset = _encode_basis(dictionary, whitener, cfg.alpha)
    cell_idx = patch_cell_index(height, width, side, cfg.stride,
                                cfg.pool_grid)
    out = np.empty((n, cfg.n_cells * dictionary.size))
    pool_max = cfg.pool_op == "max"
    for i in range(n):
        out[i] = impl.encode_pool_image(
            np.ascontiguousarray(images[i], dtype=np.float64), basis,
            offset, side, cfg.stride, bias, cell_idx, cfg.n_cells, pool_max)
    return out


def pooling_cell_pixels(height, width, pool_grid):
    """Pixel dimensions of one (non-remainder) pooling cell."""
    return height // pool_grid[0], width // pool_grid[1]


def sample_pooled_regions(dictionary, dataset, cfg, whitener,
                          bias=DEFAULT_BIAS, count=100_000, seed=0):
    """Pooled activations of random cell-sized regions: (count, dict_size).

    Each draw picks an image and a uniform region position; the region has
    the pixel dimensions of one pooling cell and is pooled whole (a 1x1
    grid) with cfg.pool_op.  Deterministic for a fixed seed.
    """
    if count < 2:
        raise ValueError("need at least 2 regions for covariance estimation")
    n, channels, height, width = dataset.images.shape
    region_h, region_w = pooling_cell_pixels(height, width, cfg.pool_grid)
    side = dictionary.patch_side
    if region_h < side or region_w < side:
        raise ValueError(
            f"pooling region {region_h}x{region_w} smaller than patch "
            f"side {side}")
    rng = np.random.default_rng(seed)
    img_idx = rng.integers(0, n, size=count)
    rows = rng.integers(0, height - region_h + 1, size=count)
    cols = rng.integers(0, width - region_w + 1, size=count)

    impl = kernels.get_backend()
    basis, offset = _encode_basis(dictionary, whitener, cfg.alpha)
    cell_idx = patch_cell_index(region_h, region_w, side, cfg.stride, (1, 1))
    pool_max = cfg.pool_op == "max"
    out = np.empty((count, dictionary.size))
    for i in range(count):
        region = dataset.images[img_idx[i], :,
                                rows[i]:rows[i] + region_h,
                                cols[i]:cols[i] + region_w]
        out[i] = impl.encode_pool_image(
            np.ascontiguousarray(region, dtype=np.float64), basis, offset,
            side, cfg.stride, bias, cell_idx, 1, pool_max)
    return out


def encode_image_patches(dictionary, img, cfg, whitener, bias=DEFAULT_BIAS):
    """Per-patch activation matrix (n_patches, dict_size) of one image.

    Reference path used by tests and patch-level statistics; the pooled
    product of this matrix must match encode_and_pool.
    """
    raw = extract_dense(np.asarray(img, dtype=np.float64),
                        dictionary.patch_side, cfg.stride)
    whitened = apply_zca(whitener, contrast_normalize(raw, bias))
    return encode_patches(dictionary, whitened, cfg.alpha)
