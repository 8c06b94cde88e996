"""Covariance reconstruction from a code subset and feature rescaling.

Selecting K of M codes induces the block view C = [[C_SS, C_Sr], [C_rS,
C_rr]] with W the M x K column slab at the selected indices.  The subset
reconstruction W pinv(C_SS) W^T approximates C, the mapping A = W
pinv(C_SS) lifts selected pooled features toward the M-dimensional ones,
and the SVD A = U diag(s) V gives the K x K rescaling matrix diag(s) V
applied to selected features at extraction time.  A PCA path over the
same pooled covariance serves as the dense dimensionality-reduction
reference.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from pdl.selection import DegenerateInputError

PINV_RTOL = 1e-10


@dataclass
class NystromTransform:
    selected: np.ndarray          # (k,) sorted code indices
    A: np.ndarray                 # (m, k) lifting matrix W pinv(C_SS)
    lambda_v: np.ndarray          # (k, k) rescaling matrix diag(s) V
    singular_values: np.ndarray   # (k,) non-increasing

    @property
    def k(self):
        return len(self.selected)


@dataclass
class PcaTransform:
    components: np.ndarray   # (m, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,) non-increasing
    mean: np.ndarray         # (m,)

    @property
    def k(self):
        return self.components.shape[1]


def pinv_psd(mat, rtol=PINV_RTOL):
    """Pseudo-inverse of a symmetric PSD matrix, truncating small spectrum.

    Eigenvalues below rtol times the largest are dropped; returns the
    inverse and the retained rank.
    """
    sym = (mat + mat.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    cutoff = rtol * max(eigvals.max(initial=0.0), 0.0)
    keep = eigvals > cutoff
    inv_vals = np.where(keep, 1.0 / np.where(keep, eigvals, 1.0), 0.0)
    return (eigvecs * inv_vals) @ eigvecs.T, int(keep.sum())


def _as_matrix(cov):
    return cov.C if hasattr(cov, "C") else np.asarray(cov, dtype=np.float64)


def nystrom_reconstruct(cov, selected):
    """Subset reconstruction W pinv(C_SS) W^T of a covariance matrix."""
    C = _as_matrix(cov)
    idx = np.asarray(selected, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("selected index set must be non-empty")
    if idx.min() < 0 or idx.max() >= C.shape[0]:
        raise ValueError("selected indices out of range")
    W = C[:, idx]
    c_ss_inv, _ = pinv_psd(C[np.ix_(idx, idx)])
    return W @ c_ss_inv @ W.T


def fit_transform_matrix(cov, exemplars):
    """Rescaling transform for the selected codes.

    Builds A = W pinv(C_SS), takes the thin SVD A = U diag(s) V and
    stores diag(s) V with the singular values.  Rows of V are
    sign-fixed so their largest-magnitude entry is positive.
    """
    C = _as_matrix(cov)
    idx = np.sort(np.asarray(
        exemplars.indices if hasattr(exemplars, "indices") else exemplars,
        dtype=np.intp))
    W = C[:, idx]
    c_ss_inv, rank = pinv_psd(C[np.ix_(idx, idx)])
    if rank == 0:
        raise DegenerateInputError("selected covariance block has rank 0")
    if rank < idx.size:
        warnings.warn(f"selected covariance block is rank-deficient "
                      f"({rank}/{idx.size}); pseudo-inverse truncated")
    A = W @ c_ss_inv
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    U, Vh = _fix_signs(U, Vh)
    return NystromTransform(selected=idx, A=A, lambda_v=s[:, None] * Vh,
                            singular_values=s)


def _fix_signs(U, Vh):
    """Make each right singular vector's largest-magnitude entry positive."""
    picks = np.argmax(np.abs(Vh), axis=1)
    signs = np.sign(Vh[np.arange(Vh.shape[0]), picks])
    signs[signs == 0] = 1.0
    return U * signs[None, :], Vh * signs[:, None]


def apply_rescale(transform, x_selected):
    """Rescaled feature diag(s) V @ x for one selected-feature vector."""
    x = np.asarray(x_selected, dtype=np.float64)
    if x.shape[-1] != transform.k:
        raise ValueError(f"feature length {x.shape[-1]} != {transform.k}")
    return x @ transform.lambda_v.T


def rescale_pooled(transform, pooled, n_cells):
    """Apply the rescale per pooling-cell block of a pooled feature matrix."""
    n = pooled.shape[0]
    k = transform.k
    blocks = pooled.reshape(n, n_cells, k)
    return (blocks @ transform.lambda_v.T).reshape(n, n_cells * k)


def fit_pca(pooled, k):
    """Top-k principal components of pooled feature rows.

    Components are sorted by eigenvalue descending and sign-fixed so the
    largest-magnitude entry of each is positive.
    """
    pooled = np.asarray(pooled, dtype=np.float64)
    n, m = pooled.shape
    if not 1 <= k <= min(n - 1, m):
        raise ValueError(f"k must lie in 1..min(n-1, m) = "
                         f"{min(n - 1, m)}, got {k}")
    mean = pooled.mean(axis=0)
    centered = pooled - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    comps = eigvecs[:, order]
    vals = eigvals[order]
    picks = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[picks, np.arange(k)])
    signs[signs == 0] = 1.0
    return PcaTransform(components=comps * signs[None, :],
                        eigenvalues=vals, mean=mean)


def apply_pca(transform, x):
    """Projection U_k^T (x - mean)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != transform.mean.shape[0]:
        raise ValueError(f"feature length {x.shape[-1]} != "
                         f"{transform.mean.shape[0]}")
    return (x - transform.mean) @ transform.components


def pca_pooled(transform, pooled, n_cells):
    """Apply the PCA reduction per pooling-cell block."""
    n = pooled.shape[0]
    m = transform.mean.shape[0]
    blocks = pooled.reshape(n, n_cells, m)
    return ((blocks - transform.mean) @ transform.components).reshape(
        n, n_cells * transform.k)


def spectrum(mat):
    """Eigenvalues of a symmetric matrix, sorted descending."""
    return np.linalg.eigvalsh((mat + mat.T) / 2.0)[::-1]


@dataclass
class CorrelationStats:
    """Pearson correlation samples for the selection diagnostics."""

    within_patch: np.ndarray    # same-cluster pairs, patch-level activations
    within_pooled: np.ndarray   # same-cluster pairs, pooled activations
    between_pooled: np.ndarray  # distinct-exemplar pairs, pooled activations


def _standardize_columns(mat):
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    z = (mat - mean) / safe
    z[:, std == 0] = 0.0  # zero-variance columns correlate with nothing
    return z


def _pair_correlations(z, pairs):
    if len(pairs) == 0:
        return np.empty(0)
    i, j = pairs[:, 0], pairs[:, 1]
    return np.mean(z[:, i] * z[:, j], axis=0)


def correlation_stats(pooled, patch_acts, exemplars, sample_pairs=1000,
                      seed=0):
    """Correlation samples before/after pooling and between exemplars.

    Draws up to sample_pairs uniform pairs of distinct codes sharing a
    cluster (used for both the patch-level and pooled samples) and up to
    sample_pairs uniform pairs of distinct exemplars.  Singleton clusters
    cannot form pairs and are skipped.
    """
    if sample_pairs < 1:
        raise ValueError("sample_pairs must be >= 1")
    rng = np.random.default_rng(seed)

    within = []
    for ex in exemplars.indices:
        members = exemplars.members(ex)
        if members.size < 2:
            continue
        ii, jj = np.triu_indices(members.size, k=1)
        within.append(np.column_stack([members[ii], members[jj]]))
    if within:
        within = np.concatenate(within)
        if within.shape[0] > sample_pairs:
            pick = rng.choice(within.shape[0], size=sample_pairs,
                              replace=False)
            within = within[np.sort(pick)]
    else:
        warnings.warn("no cluster has more than one member; within-cluster "
                      "correlation samples are empty")
        within = np.empty((0, 2), dtype=np.intp)

    ex_idx = exemplars.indices
    ii, jj = np.triu_indices(ex_idx.size, k=1)
    between = np.column_stack([ex_idx[ii], ex_idx[jj]])
    if between.shape[0] > sample_pairs:
        pick = rng.choice(between.shape[0], size=sample_pairs, replace=False)
        between = between[np.sort(pick)]

    z_pooled = _standardize_columns(np.asarray(pooled, dtype=np.float64))
    z_patch = _standardize_columns(np.asarray(patch_acts, dtype=np.float64))
    return CorrelationStats(
        within_patch=_pair_correlations(z_patch, within),
        within_pooled=_pair_correlations(z_pooled, within),
        between_pooled=_pair_correlations(z_pooled, between),
    )
