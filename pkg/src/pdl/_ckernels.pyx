# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled encode+pool kernel; same contract as pdl._pykernels.

Fuses the dense patch gather, per-patch contrast normalization,
basis projection (one BLAS dgemm per image), threshold nonlinearity and
pooling accumulation, avoiding the large intermediates the numpy path
materializes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "cython"


def encode_pool_image(double[:, :, ::1] img, double[:, ::1] basis,
                      double[::1] offset, int side, int stride, double bias,
                      cnp.int64_t[::1] cell_idx, int n_cells, bint pool_max):
    cdef int channels = img.shape[0]
    cdef int height = img.shape[1]
    cdef int width = img.shape[2]
    cdef int d = basis.shape[0]
    cdef int m = basis.shape[1]
    cdef int n_rows = (height - side) // stride + 1
    cdef int n_cols = (width - side) // stride + 1
    cdef int n_patches = n_rows * n_cols
    if cell_idx.shape[0] != n_patches:
        raise ValueError("cell index table does not match the patch grid")
    if channels * side * side != d:
        raise ValueError("basis rows do not match the patch dimension")

    patch_buf = np.empty((n_patches, d), dtype=np.float64)
    acts_buf = np.empty((n_patches, m), dtype=np.float64)
    out_arr = np.zeros(n_cells * m, dtype=np.float64)
    counts_arr = np.zeros(n_cells, dtype=np.int64)
    cdef double[:, ::1] patches = patch_buf
    cdef double[:, ::1] acts = acts_buf
    cdef double[::1] out = out_arr
    cdef cnp.int64_t[::1] counts = counts_arr

    cdef int p, pr, pc, r0, c0, c, r, cc, j, k
    cdef double v, mean, var, scale, val
    cdef cnp.int64_t cell

    # gather + contrast-normalize each patch row (two-pass mean/variance)
    p = 0
    for pr in range(n_rows):
        r0 = pr * stride
        for pc in range(n_cols):
            c0 = pc * stride
            j = 0
            mean = 0.0
            for c in range(channels):
                for r in range(side):
                    for cc in range(side):
                        v = img[c, r0 + r, c0 + cc]
                        patches[p, j] = v
                        mean += v
                        j += 1
            mean /= d
            var = 0.0
            for j in range(d):
                v = patches[p, j] - mean
                patches[p, j] = v
                var += v * v
            scale = 1.0 / sqrt(var / d + bias)
            for j in range(d):
                patches[p, j] *= scale
            p += 1

    # acts = patches @ basis via dgemm on the transposed (column-major) view
    cdef char trans = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef int mm = m
    cdef int nn = n_patches
    cdef int kk = d
    dgemm(&trans, &trans, &mm, &nn, &kk, &one, &basis[0, 0], &mm,
          &patches[0, 0], &kk, &zero, &acts[0, 0], &mm)

    # threshold nonlinearity fused with the pooling accumulation
    for p in range(n_patches):
        cell = cell_idx[p]
        counts[cell] += 1
        if pool_max:
            for k in range(m):
                val = acts[p, k] - offset[k]
                if val > out[cell * m + k]:
                    out[cell * m + k] = val
        else:
            for k in range(m):
                val = acts[p, k] - offset[k]
                if val > 0.0:
                    out[cell * m + k] += val
    if not pool_max:
        for cell in range(n_cells):
            if counts[cell] > 0:
                for k in range(m):
                    out[cell * m + k] /= counts[cell]
    return out_arr
