"""Pure-numpy implementation of the hot encode+pool kernel.

`pdl.kernels` picks these up when the compiled extension is unavailable
or disabled.  Both backends implement the same contract: dense patches of
one image are contrast-normalized, mapped through a precomputed
whitening+dictionary basis, threshold-encoded and pooled per cell.
"""

import numpy as np

BACKEND_NAME = "python"


def encode_pool_image(img, basis, offset, side, stride, bias,
                      cell_idx, n_cells, pool_max):
    """Pooled feature vector (cell-major, code inner) for one image.

    img:      float64 (channels, height, width)
    basis:    float64 (d, m), whitening transform times dictionary rows
    offset:   float64 (m,), per-code activation offset (mean term + alpha)
    cell_idx: int64 (n_patches,), pooling cell per dense patch
    """
    channels, height, width = img.shape
    win = np.lib.stride_tricks.sliding_window_view(img, (side, side),
                                                   axis=(1, 2))
    win = win[:, ::stride, ::stride]
    n_rows, n_cols = win.shape[1], win.shape[2]
    n_patches = n_rows * n_cols
    d = channels * side * side
    patches = win.transpose(1, 2, 0, 3, 4).reshape(n_patches, d)

    mean = patches.mean(axis=1, keepdims=True)
    centered = patches - mean
    var = np.mean(centered ** 2, axis=1, keepdims=True)
    normalized = centered / np.sqrt(var + bias)

    acts = np.maximum(normalized @ basis - offset, 0.0)

    m = basis.shape[1]
    out = np.zeros((n_cells, m))
    for cell in range(n_cells):
        rows = acts[cell_idx == cell]
        if rows.shape[0] == 0:
            continue
        out[cell] = rows.max(axis=0) if pool_max else rows.mean(axis=0)
    return out.reshape(n_cells * m)
