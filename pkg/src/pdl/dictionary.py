"""Dictionary learning over whitened patches.

The starting dictionary is learned with spherical K-means: codes live on
the unit sphere, patches are assigned to the code with the largest dot
product, and each code update renormalizes the sum of its assigned
patches.  A random-patch baseline covers uniform code selection.
"""

from dataclasses import dataclass

import numpy as np

ASSIGN_CHUNK = 65536  # patches per assignment GEMM block
DUPLICATE_DOT = 1.0 - 1e-9


@dataclass
class Dictionary:
    """Ordered set of unit-norm codes."""

    codes: np.ndarray  # (M, d), rows unit L2 norm
    patch_side: int
    channels: int
    provenance: str  # "kmeans" | "random"

    @property
    def size(self):
        return self.codes.shape[0]

    @property
    def dim(self):
        return self.codes.shape[1]

    def subset(self, indices):
        """New dictionary restricted to the given code rows."""
        return Dictionary(self.codes[np.asarray(indices)],
                          self.patch_side, self.channels, self.provenance)


def _normalize_rows(rows):
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / norms


def _assign(patches, codes):
    """Index of the best-matching code per patch, chunked GEMM + argmax."""
    n = patches.shape[0]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, ASSIGN_CHUNK):
        block = patches[start:start + ASSIGN_CHUNK]
        out[start:start + ASSIGN_CHUNK] = np.argmax(block @ codes.T, axis=1)
    return out


def kmeans_objective(patches, codes):
    """Sum over patches of the squared distance to the nearest code."""
    total = 0.0
    n = patches.shape[0]
    for start in range(0, n, ASSIGN_CHUNK):
        block = patches[start:start + ASSIGN_CHUNK]
        best = np.max(block @ codes.T, axis=1)
        total += float(np.sum(np.sum(block ** 2, axis=1) - 2.0 * best + 1.0))
    return total


def _cluster_sums(patches, assign, m):
    """Per-cluster patch sums, accumulated in fixed index order."""
    d = patches.shape[1]
    sums = np.empty((m, d))
    for j in range(d):
        sums[:, j] = np.bincount(assign, weights=patches[:, j], minlength=m)
    return sums


def kmeans_spherical(patches, m, iters=50, seed=0, init_codes=None):
    """Spherical K-means: m unit-norm codes from whitened patches.

    Initialization picks m distinct random patches (renormalized) unless
    `init_codes` supplies explicit starting codes.  Each iteration assigns
    patches by dot product and renormalizes cluster sums; empty clusters
    and zero-norm updates are reseeded from a random patch.  Stops early
    once assignments no longer change.  Deterministic for a fixed seed.
    """
    n, d = patches.shape
    if n < m:
        raise ValueError(f"need at least {m} patches to learn {m} codes, "
                         f"got {n}")
    if m < 1:
        raise ValueError("dictionary size must be >= 1")
    rng = np.random.default_rng(seed)

    if init_codes is not None:
        codes = _normalize_rows(np.array(init_codes, dtype=np.float64))
    else:
        init_idx = rng.choice(n, size=m, replace=False)
        codes = _normalize_rows(_nonzero_rows(patches, init_idx, rng))

    assign = _assign(patches, codes)
    for _ in range(iters):
        sums = _cluster_sums(patches, assign, m)
        counts = np.bincount(assign, minlength=m)
        norms = np.linalg.norm(sums, axis=1)
        ok = (counts > 0) & (norms > 0)
        codes = np.where(ok[:, None], sums / np.where(ok, norms, 1.0)[:, None],
                         codes)
        for k in np.nonzero(~ok)[0]:
            codes[k] = _random_unit_patch(patches, rng)
        new_assign = _assign(patches, codes)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign

    codes = _deduplicate(codes, patches, rng)
    side, channels = _infer_geometry(d)
    return Dictionary(codes=codes, patch_side=side, channels=channels,
                      provenance="kmeans")


def random_dictionary(patches, m, seed=0):
    """Baseline: m distinct patches sampled without replacement, renormalized."""
    n, d = patches.shape
    if n < m:
        raise ValueError(f"need at least {m} patches to pick {m} codes, "
                         f"got {n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=m, replace=False)
    codes = _normalize_rows(_nonzero_rows(patches, idx, rng))
    codes = _deduplicate(codes, patches, rng)
    side, channels = _infer_geometry(d)
    return Dictionary(codes=codes, patch_side=side, channels=channels,
                      provenance="random")


def _nonzero_rows(patches, idx, rng):
    """Selected patch rows with zero-norm picks resampled."""
    rows = patches[idx].copy()
    norms = np.linalg.norm(rows, axis=1)
    for k in np.nonzero(norms == 0)[0]:
        rows[k] = _random_unit_patch(patches, rng) # already unit norm
    return rows


def _random_unit_patch(patches, rng):
    for _ in range(1000):
        row = patches[rng.integers(0, patches.shape[0])]
        norm = np.linalg.norm(row)
        if norm > 0:
            return row / norm
    raise ValueError("could not find a nonzero patch to reseed from")


def _deduplicate(codes, patches, rng):
    """Replace near-duplicate codes so rows stay pairwise distinct."""
    for _ in range(100):
        gram = codes @ codes.T
        np.fill_diagonal(gram, 0.0)
        dup_i, dup_j = np.nonzero(np.triu(gram > DUPLICATE_DOT))
        if dup_i.size == 0:
            return codes
        for k in np.unique(dup_j):
            codes[k] = _random_unit_patch(patches, rng)
    raise ValueError("failed to remove duplicate codes")


def _infer_geometry(d):
    """(patch_side, channels) from the flattened dimension, 3- or 1-channel."""
    for channels in (3, 1):
        if d % channels == 0:
            side = round((d // channels) ** 0.5)
            if side * side * channels == d:
                return side, channels
    return 0, 1
