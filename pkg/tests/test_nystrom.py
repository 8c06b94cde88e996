import numpy as np
import pytest

from pdl import nystrom, selection

from conftest import random_psd


def _exemplar_set(indices, m):
    indices = np.asarray(indices)
    assignment = indices[np.zeros(m, dtype=np.intp)]
    assignment[indices] = indices
    return selection.ExemplarSet(indices=indices, assignment=assignment,
                                 preference_used=0.0)


class TestReconstruct:
    def test_full_subset_exact(self):
        rng = np.random.default_rng(0)
        C = random_psd(rng, 15)
        rec = nystrom.nystrom_reconstruct(C, np.arange(15))
        np.testing.assert_allclose(rec, C, atol=1e-8 * np.abs(C).max())

    def test_rank_one_single_column_exact(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=9)
        C = np.outer(v, v)
        rec = nystrom.nystrom_reconstruct(C, [int(np.argmax(np.abs(v)))])
        np.testing.assert_allclose(rec, C, atol=1e-10)

    def test_residual_psd(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            C = random_psd(rng, 20)
            sel = np.sort(rng.choice(20, size=5, replace=False))
            resid = C - nystrom.nystrom_reconstruct(C, sel)
            eig = np.linalg.eigvalsh((resid + resid.T) / 2)
            assert eig.min() >= -1e-8 * np.linalg.eigvalsh(C).max()

    def test_nested_subsets_monotone_error(self):
        rng = np.random.default_rng(3)
        C = random_psd(rng, 18)
        order = rng.permutation(18)
        prev = np.inf
        for size in (3, 6, 10, 14, 18):
            rec = nystrom.nystrom_reconstruct(C, np.sort(order[:size]))
            err = np.linalg.norm(C - rec)
            assert err <= prev + 1e-8
            prev = err

    def test_eigenvalue_dominance(self):
        rng = np.random.default_rng(4)
        C = random_psd(rng, 16)
        rec = nystrom.nystrom_reconstruct(C, np.arange(0, 16, 3))
        ev_c = np.sort(np.linalg.eigvalsh(C))[::-1]
        ev_r = np.sort(np.linalg.eigvalsh(rec))[::-1]
        assert np.all(ev_r <= ev_c + 1e-8)

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError):
            nystrom.nystrom_reconstruct(np.eye(3), [])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            nystrom.nystrom_reconstruct(np.eye(3), [3])


class TestTransformMatrix:
    def test_diagonal_covariance(self):
        rng = np.random.default_rng(5)
        C = np.diag(rng.uniform(1.0, 4.0, 10))
        sel = np.array([2, 5, 8])
        T = nystrom.fit_transform_matrix(C, _exemplar_set(sel, 10))
        # A places a single 1 in each selected row
        assert np.count_nonzero(np.abs(T.A) > 1e-12) == 3
        np.testing.assert_allclose(T.A[sel, np.arange(3)], 1.0, rtol=1e-12)
        np.testing.assert_allclose(T.singular_values, 1.0, rtol=1e-12)

    def test_full_subset_identity(self):
        rng = np.random.default_rng(6)
        C = random_psd(rng, 8)
        T = nystrom.fit_transform_matrix(C, _exemplar_set(np.arange(8), 8))
        np.testing.assert_allclose(T.A, np.eye(8), atol=1e-8)
        np.testing.assert_allclose(T.singular_values, 1.0, atol=1e-8)

    def test_svd_reconstruction_and_orthonormal_u(self):
        rng = np.random.default_rng(7)
        C = random_psd(rng, 12)
        sel = np.array([0, 3, 4, 9])
        T = nystrom.fit_transform_matrix(C, _exemplar_set(sel, 12))
        assert np.all(np.diff(T.singular_values) <= 1e-12)
        assert np.all(T.singular_values >= 0)
        # U = A (lambda_v)^-1 has orthonormal columns
        U = T.A @ np.linalg.inv(T.lambda_v)
        np.testing.assert_allclose(U.T @ U, np.eye(4), atol=1e-8)
        np.testing.assert_allclose(U @ T.lambda_v, T.A,
                                   atol=1e-8 * np.abs(T.A).max())

    def test_sign_convention(self):
        rng = np.random.default_rng(8)
        C = random_psd(rng, 10)
        T = nystrom.fit_transform_matrix(C, _exemplar_set([1, 4, 7], 10))
        V = T.lambda_v / T.singular_values[:, None]
        picks = np.argmax(np.abs(V), axis=1)
        assert np.all(V[np.arange(3), picks] > 0)

    def test_degenerate_block_rejected(self):
        C = np.zeros((4, 4))
        C[0, 0] = 1.0
        with pytest.raises(selection.DegenerateInputError):
            nystrom.fit_transform_matrix(C, _exemplar_set([1, 2], 4))


class TestApplyRescale:
    def test_identity(self):
        T = nystrom.NystromTransform(selected=np.arange(3), A=np.eye(3),
                                     lambda_v=np.eye(3),
                                     singular_values=np.ones(3))
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(nystrom.apply_rescale(T, x), x)

    def test_zero_vector(self):
        rng = np.random.default_rng(9)
        C = random_psd(rng, 6)
        T = nystrom.fit_transform_matrix(C, _exemplar_set([0, 2], 6))
        np.testing.assert_allclose(nystrom.apply_rescale(T, np.zeros(2)), 0.0)

    def test_norm_matches_lift(self):
        rng = np.random.default_rng(10)
        C = random_psd(rng, 9)
        T = nystrom.fit_transform_matrix(C, _exemplar_set([1, 3, 6], 9))
        for _ in range(5):
            x = rng.normal(size=3)
            assert np.linalg.norm(nystrom.apply_rescale(T, x)) == (
                pytest.approx(np.linalg.norm(T.A @ x), rel=1e-8))

    def test_round_trip_invertible(self):
        rng = np.random.default_rng(11)
        C = random_psd(rng, 9)
        T = nystrom.fit_transform_matrix(C, _exemplar_set([0, 4, 8], 9))
        assert T.singular_values.min() > 1e-10 * T.singular_values.max()
        x = rng.normal(size=3)
        back = np.linalg.solve(T.lambda_v, nystrom.apply_rescale(T, x))
        np.testing.assert_allclose(back, x, rtol=1e-6)

    def test_dimension_mismatch_rejected(self):
        T = nystrom.NystromTransform(selected=np.arange(3), A=np.eye(3),
                                     lambda_v=np.eye(3),
                                     singular_values=np.ones(3))
        with pytest.raises(ValueError):
            nystrom.apply_rescale(T, np.zeros(4))

    def test_blockwise_application(self):
        rng = np.random.default_rng(12)
        C = random_psd(rng, 6)
        T = nystrom.fit_transform_matrix(C, _exemplar_set([1, 3], 6))
        pooled = rng.normal(size=(5, 4))  # 2 cells x 2 selected codes
        out = nystrom.rescale_pooled(T, pooled, n_cells=2)
        for cell in range(2):
            np.testing.assert_allclose(
                out[:, cell * 2:(cell + 1) * 2],
                pooled[:, cell * 2:(cell + 1) * 2] @ T.lambda_v.T,
                rtol=1e-12)


class TestPca:
    def test_line_data(self):
        rng = np.random.default_rng(13)
        direction = np.array([1.0, 2.0, -1.0])
        direction /= np.linalg.norm(direction)
        data = rng.normal(size=(200, 1)) * direction + 5.0
        T = nystrom.fit_pca(data, 1)
        assert abs(T.components[:, 0] @ direction) >= 1.0 - 1e-6

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(14)
        data = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6))
        T = nystrom.fit_pca(data, 6)
        centered = data - data.mean(axis=0)
        cov = centered.T @ centered / (len(data) - 1)
        rec = (T.components * T.eigenvalues) @ T.components.T
        np.testing.assert_allclose(rec, cov, atol=1e-8 * np.abs(cov).max())

    def test_isotropic_eigenvalue_ratio(self):
        rng = np.random.default_rng(15)
        T = nystrom.fit_pca(rng.normal(size=(100_000, 5)), 2)
        ratio = T.eigenvalues[0] / T.eigenvalues[1]
        assert 1.0 <= ratio <= 1.5

    def test_orthonormal_components_sorted(self):
        rng = np.random.default_rng(16)
        data = rng.normal(size=(200, 8)) @ rng.normal(size=(8, 8))
        T = nystrom.fit_pca(data, 4)
        np.testing.assert_allclose(T.components.T @ T.components, np.eye(4),
                                   atol=1e-10)
        assert np.all(np.diff(T.eigenvalues) <= 1e-12)

    def test_apply_mean_is_zero(self):
        rng = np.random.default_rng(17)
        data = rng.normal(size=(50, 4))
        T = nystrom.fit_pca(data, 2)
        np.testing.assert_allclose(nystrom.apply_pca(T, T.mean), 0.0,
                                   atol=1e-12)

    def test_apply_component_gives_basis_vector(self):
        rng = np.random.default_rng(18)
        data = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5))
        T = nystrom.fit_pca(data, 3)
        out = nystrom.apply_pca(T, T.mean + T.components[:, 0])
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-10)

    def test_projection_contracts(self):
        rng = np.random.default_rng(19)
        data = rng.normal(size=(100, 6))
        T = nystrom.fit_pca(data, 3)
        x = rng.normal(size=6)
        assert (np.linalg.norm(nystrom.apply_pca(T, x))
                <= np.linalg.norm(x - T.mean) + 1e-12)

    def test_k_too_large_rejected(self):
        rng = np.random.default_rng(20)
        with pytest.raises(ValueError):
            nystrom.fit_pca(rng.normal(size=(10, 5)), 6)

    def test_pca_beats_nystrom_in_frobenius(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            m = int(rng.integers(8, 24))
            C = random_psd(rng, m)
            k = int(rng.integers(2, m - 1))
            sel = np.sort(rng.choice(m, size=k, replace=False))
            ny_err = np.linalg.norm(C - nystrom.nystrom_reconstruct(C, sel))
            eigvals, eigvecs = np.linalg.eigh(C)
            top = eigvecs[:, -k:] * eigvals[-k:]
            pca_err = np.linalg.norm(C - top @ eigvecs[:, -k:].T)
            assert pca_err <= ny_err + 1e-10


class TestCorrelationStats:
    def test_identical_codes_fully_correlated(self):
        rng = np.random.default_rng(22)
        col = rng.normal(size=300)
        pooled = np.column_stack([col, col, col])
        patch = np.column_stack([col, col, col])
        ex = selection.ExemplarSet(indices=np.array([0, 2]),
                                   assignment=np.array([0, 0, 2]),
                                   preference_used=0.0)
        stats = nystrom.correlation_stats(pooled, patch, ex, 10, seed=0)
        np.testing.assert_allclose(stats.within_patch, 1.0, rtol=1e-10)
        np.testing.assert_allclose(stats.within_pooled, 1.0, rtol=1e-10)
        np.testing.assert_allclose(stats.between_pooled, 1.0, rtol=1e-10)

    def test_independent_features_near_zero(self):
        rng = np.random.default_rng(23)
        pooled = rng.normal(size=(10_000, 40))
        patch = rng.normal(size=(5_000, 40))
        ex = selection.ExemplarSet(
            indices=np.arange(40),
            assignment=np.arange(40), preference_used=0.0)
        stats = nystrom.correlation_stats(pooled, patch, ex, 1000, seed=1)
        assert abs(stats.between_pooled.mean()) <= 0.1

    def test_singleton_clusters_warn(self):
        rng = np.random.default_rng(24)
        pooled = rng.normal(size=(100, 3))
        ex = selection.ExemplarSet(indices=np.arange(3),
                                   assignment=np.arange(3),
                                   preference_used=0.0)
        with pytest.warns(UserWarning):
            stats = nystrom.correlation_stats(pooled, pooled, ex, 10, seed=2)
        assert stats.within_patch.size == 0
        assert stats.between_pooled.size > 0

    def test_pair_budget_respected(self):
        rng = np.random.default_rng(25)
        pooled = rng.normal(size=(200, 30))
        ex = selection.ExemplarSet(
            indices=np.array([0]),
            assignment=np.zeros(30, dtype=np.int64), preference_used=0.0)
        stats = nystrom.correlation_stats(pooled, pooled, ex, 17, seed=3)
        assert stats.within_patch.size == 17


def test_spectrum_sorted_descending():
    rng = np.random.default_rng(26)
    C = random_psd(rng, 10)
    spec = nystrom.spectrum(C)
    assert np.all(np.diff(spec) <= 1e-12)
