import numpy as np
import pytest

from pdl import dictionary


def _unit_rows(rows):
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class TestKmeansSpherical:
    def test_degenerate_one_point_clusters(self):
        rng = np.random.default_rng(0)
        pts = _unit_rows(rng.normal(size=(8, 5)))
        d = dictionary.kmeans_spherical(pts, 8, iters=30, seed=1)
        # every code must equal one of the (already unit-norm) patches
        assert d.size == 8
        assert dictionary.kmeans_objective(pts, d.codes) == pytest.approx(
            0.0, abs=1e-12)

    def test_antipodal_clusters_closed_form(self):
        rng = np.random.default_rng(1)
        theta = rng.normal(scale=0.01, size=200)
        up = np.column_stack([np.cos(theta + np.pi / 2),
                              np.sin(theta + np.pi / 2)])
        down = -up
        pts = np.vstack([up, down])
        d = dictionary.kmeans_spherical(pts, 2, iters=50, seed=2)
        means = [_unit_rows(up.mean(axis=0, keepdims=True))[0],
                 _unit_rows(down.mean(axis=0, keepdims=True))[0]]
        for code in d.codes:
            angles = [np.arccos(np.clip(code @ m, -1, 1)) for m in means]
            assert min(angles) < 1e-3

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(300, 10))
        objs = []
        codes = None
        for iters in range(1, 8):
            d = dictionary.kmeans_spherical(pts, 12, iters=iters, seed=3)
            objs.append(dictionary.kmeans_objective(pts, d.codes))
            codes = d.codes
        for a, b in zip(objs, objs[1:]):
            assert b <= a + 1e-9
        assert codes is not None

    def test_unit_norm_and_distinct_rows(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(500, 16))
        d = dictionary.kmeans_spherical(pts, 20, iters=25, seed=4)
        np.testing.assert_allclose(np.linalg.norm(d.codes, axis=1), 1.0,
                                   atol=1e-6)
        gram = d.codes @ d.codes.T
        np.fill_diagonal(gram, 0.0)
        assert gram.max() < 1.0 - 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(200, 8))
        a = dictionary.kmeans_spherical(pts, 10, iters=15, seed=5)
        b = dictionary.kmeans_spherical(pts, 10, iters=15, seed=5)
        assert np.array_equal(a.codes, b.codes)

    def test_permutation_invariance_with_shared_init(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(300, 6))
        init = _unit_rows(rng.normal(size=(8, 6)))
        perm = rng.permutation(300)
        a = dictionary.kmeans_spherical(pts, 8, iters=40, seed=0,
                                        init_codes=init)
        b = dictionary.kmeans_spherical(pts[perm], 8, iters=40, seed=0,
                                        init_codes=init)
        # same code set up to row permutation: greedy-match rows
        dots = a.codes @ b.codes.T
        matched = set()
        for i in range(8):
            j = int(np.argmax(dots[i]))
            assert dots[i, j] > 1.0 - 1e-6
            matched.add(j)
        assert len(matched) == 8

    def test_too_few_patches_rejected(self):
        with pytest.raises(ValueError):
            dictionary.kmeans_spherical(np.ones((3, 4)), 5)

    def test_geometry_inferred(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(300, 108))
        d = dictionary.kmeans_spherical(pts, 4, iters=5, seed=0)
        assert (d.patch_side, d.channels) == (6, 3)
        assert d.provenance == "kmeans"


class TestRandomDictionary:
    def test_m_equals_n_is_permutation(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(12, 5))
        d = dictionary.random_dictionary(pts, 12, seed=1)
        normalized = _unit_rows(pts)
        for code in d.codes:
            assert np.any(np.all(np.isclose(normalized, code, atol=1e-12),
                                 axis=1))
        assert d.provenance == "random"

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(100, 7))
        a = dictionary.random_dictionary(pts, 20, seed=9)
        b = dictionary.random_dictionary(pts, 20, seed=9)
        assert np.array_equal(a.codes, b.codes)

    def test_shape_and_norms(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(4000, 108))
        d = dictionary.random_dictionary(pts, 200, seed=0)
        assert d.codes.shape == (200, 108)
        np.testing.assert_allclose(np.linalg.norm(d.codes, axis=1), 1.0,
                                   atol=1e-6)

    def test_too_few_patches_rejected(self):
        with pytest.raises(ValueError):
            dictionary.random_dictionary(np.ones((3, 4)), 5)


def test_subset_keeps_geometry():
    rng = np.random.default_rng(10)
    pts = rng.normal(size=(50, 12))
    d = dictionary.random_dictionary(pts, 10, seed=0)
    sub = d.subset([2, 5, 7])
    assert sub.size == 3
    assert np.array_equal(sub.codes, d.codes[[2, 5, 7]])
    assert sub.patch_side == d.patch_side
