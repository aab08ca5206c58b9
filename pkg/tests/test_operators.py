"""Operators: measurement maps, transforms, differences, groups."""

import numpy as np
import pytest

from firls.exceptions import ConfigError
from firls.operators import (
    DenseOperator,
    FiniteDifferenceOperator,
    GaussianOperator,
    GroupConfig,
    IndexSelectionOperator,
    OrthogonalTransform,
    PartialFourierOperator,
    chained_pair_groups,
    check_square_dim,
    contiguous_groups,
    identity_groups,
    joint_sparsity_groups,
    wavelet_tree_groups,
)

RNG = np.random.default_rng(123)


def _all_operators():
    yield DenseOperator(RNG.standard_normal((5, 9)))
    yield GaussianOperator(7, 16, seed=3)
    yield IndexSelectionOperator(12, [0, 3, 7, 11])
    yield PartialFourierOperator((16,), np.arange(0, 16, 3))
    yield PartialFourierOperator((4, 4), [0, 1, 5, 9])


class TestMeasurementOperators:
    def test_identity_selection_forward(self):
        A = IndexSelectionOperator(3, [0, 1, 2])
        np.testing.assert_array_equal(A.forward([1.0, 2.0, 3.0]), [1, 2, 3])
        np.testing.assert_array_equal(A.adjoint([1.0, 2.0, 3.0]), [1, 2, 3])

    def test_dense_forward_adjoint(self):
        A = DenseOperator([[1.0, 0.0], [0.0, 2.0]])
        np.testing.assert_array_equal(A.forward([3.0, 4.0]), [3, 8])
        np.testing.assert_array_equal(A.adjoint([1.0, 1.0]), [1, 2])

    def test_partial_fourier_dc_bin(self):
        # Unitary normalization: the DC sample of all-ones is sum/sqrt(N).
        A = PartialFourierOperator((4,), [0])
        out = A.forward(np.ones(4))
        np.testing.assert_allclose(out, [2.0 + 0.0j], atol=1e-14)

    def test_partial_fourier_matches_dense_dft(self):
        n = 8
        F = np.fft.fft(np.eye(n), norm="ortho")
        idx = np.array([0, 2, 3, 6])
        A = PartialFourierOperator((n,), idx)
        x = RNG.standard_normal(n)
        np.testing.assert_allclose(A.forward(x), F[idx] @ x, atol=1e-12)

    @pytest.mark.parametrize("A", list(_all_operators()),
                             ids=lambda a: type(a).__name__ + str(a.range_dim))
    def test_adjoint_consistency(self, A):
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = rng.standard_normal(A.domain_dim)
            y = rng.standard_normal(A.range_dim)
            lhs = np.real(np.vdot(A.forward(x), y))
            rhs = float(x @ A.adjoint(y))
            scale = max(abs(lhs), abs(rhs), 1e-30)
            assert abs(lhs - rhs) / scale < 1e-10

    def test_mean_gram_diagonal(self):
        A = PartialFourierOperator((4, 4), np.arange(4))
        assert A.mean_gram_diagonal() == 0.25
        assert IndexSelectionOperator(3, [0, 1, 2]).mean_gram_diagonal() == 1.0
        assert DenseOperator([[1.0, 0.0], [0.0, 2.0]]).mean_gram_diagonal() == 2.5

    @pytest.mark.parametrize("A", [
        DenseOperator(RNG.standard_normal((4, 6))),
        IndexSelectionOperator(10, [1, 4, 5]),
    ], ids=["dense", "selection"])
    def test_mean_gram_diagonal_column_oracle(self, A):
        cols = [
            float(np.linalg.norm(A.forward(np.eye(A.domain_dim)[j])) ** 2)
            for j in range(A.domain_dim)
        ]
        assert abs(A.mean_gram_diagonal() - np.mean(cols)) < 1e-12

    def test_dimension_mismatch_rejected(self):
        A = DenseOperator([[1.0, 0.0], [0.0, 2.0]])
        with pytest.raises(ConfigError):
            A.forward([1.0, 2.0, 3.0])
        with pytest.raises(ConfigError):
            A.adjoint([1.0])

    def test_invalid_indices_rejected(self):
        with pytest.raises(ConfigError):
            IndexSelectionOperator(4, [0, 0, 1])       # duplicates
        with pytest.raises(ConfigError):
            IndexSelectionOperator(4, [0, 4])          # out of range
        with pytest.raises(ConfigError):
            PartialFourierOperator((4,), [-1])
        with pytest.raises(ConfigError):
            GaussianOperator(10, 4)                    # M > N


class TestOrthogonalTransform:
    def test_identity_kind(self):
        phi = OrthogonalTransform("identity", (2,))
        np.testing.assert_array_equal(phi.forward([5.0, -1.0]), [5, -1])
        np.testing.assert_array_equal(phi.inverse([5.0, -1.0]), [5, -1])

    def test_one_level_haar_dc(self):
        phi = OrthogonalTransform("haar", (4,), levels=1)
        out = phi.forward(np.ones(4))
        # The DC coefficient carries ||x||_2; details vanish.
        order = np.argsort(-np.abs(out))
        np.testing.assert_allclose(out[order], [np.sqrt(2), np.sqrt(2), 0, 0],
                                   atol=1e-12)
        full = OrthogonalTransform("haar", (4,))
        np.testing.assert_allclose(full.forward(np.ones(4)), [2, 0, 0, 0],
                                   atol=1e-12)

    @pytest.mark.parametrize("kind", ["haar", "db4"])
    @pytest.mark.parametrize("shape", [(64,), (16, 16)])
    def test_round_trip_and_energy(self, kind, shape):
        phi = OrthogonalTransform(kind, shape)
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = rng.standard_normal(int(np.prod(shape)))
            c = phi.forward(x)
            assert np.max(np.abs(phi.inverse(c) - x)) < 1e-10
            assert abs(np.linalg.norm(c) - np.linalg.norm(x)) < 1e-10
            assert np.max(np.abs(phi.forward(phi.inverse(x)) - x)) < 1e-10

    def test_dense_matrix_is_orthogonal(self):
        phi = OrthogonalTransform("db4", (16,))
        W = phi.dense_matrix()
        np.testing.assert_allclose(W @ W.T, np.eye(16), atol=1e-12)
        x = RNG.standard_normal(16)
        np.testing.assert_allclose(W @ x, phi.forward(x), atol=1e-12)

    def test_batch_matches_single(self):
        phi = OrthogonalTransform("haar", (8, 8))
        rows = RNG.standard_normal((3, 64))
        fwd = phi.forward_batch(rows)
        for row, out in zip(rows, fwd):
            np.testing.assert_allclose(out, phi.forward(row), atol=1e-14)
        np.testing.assert_allclose(phi.inverse_batch(fwd), rows, atol=1e-10)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ConfigError):
            OrthogonalTransform("haar", (7,))          # no valid dyadic split
        with pytest.raises(ConfigError):
            OrthogonalTransform("haar", (8, 4))        # not square
        with pytest.raises(ConfigError):
            OrthogonalTransform("haar", (8,), levels=9)
        with pytest.raises(ConfigError):
            OrthogonalTransform("unknown", (8,))


class TestFiniteDifferences:
    def test_d1_example(self):
        D1 = FiniteDifferenceOperator(2, 1)
        np.testing.assert_array_equal(D1.apply([1.0, 2.0, 4.0, 4.0]),
                                      [1, 1, 2, 0])

    def test_d2_example(self):
        D2 = FiniteDifferenceOperator(2, 2)
        np.testing.assert_array_equal(D2.apply([1.0, 2.0, 4.0, 4.0]),
                                      [1, 2, 3, 2])

    @pytest.mark.parametrize("direction", [1, 2])
    def test_matches_dense_matrix(self, direction):
        D = FiniteDifferenceOperator(4, direction)
        M = D.dense_matrix()
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.standard_normal(16)
            g = rng.standard_normal(16)
            np.testing.assert_allclose(D.apply(x), M @ x, atol=1e-12)
            np.testing.assert_allclose(D.adjoint(g), M.T @ g, atol=1e-12)
            assert abs(D.apply(x) @ g - x @ D.adjoint(g)) < 1e-12

    def test_d1_crosses_row_boundaries(self):
        # The first-difference subdiagonal has no zeros at row breaks.
        M = FiniteDifferenceOperator(3, 1).dense_matrix()
        assert M[3, 2] == -1.0

    def test_check_square_dim(self):
        assert check_square_dim(16) == 4
        with pytest.raises(ConfigError):
            check_square_dim(15)


class TestGroupConfig:
    def test_group_norms_examples(self):
        np.testing.assert_allclose(
            identity_groups(2).group_norms([3.0, -4.0]), [3, 4]
        )
        np.testing.assert_allclose(
            GroupConfig([[0, 1]], 2).group_norms([3.0, 4.0]), [5]
        )
        np.testing.assert_allclose(
            GroupConfig([[0, 1], [1, 2]], 3).group_norms([1.0, 2.0, 2.0]),
            [np.sqrt(5), np.sqrt(8)],
        )

    def test_gtwg_diagonal_examples(self):
        np.testing.assert_allclose(
            identity_groups(2).gtwg_diagonal([2.0, 3.0]), [2, 3]
        )
        np.testing.assert_allclose(
            GroupConfig([[0, 1], [1, 2]], 3).gtwg_diagonal([1.0, 10.0]),
            [1, 11, 10],
        )

    def test_gtwg_diagonal_matches_dense(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            N = int(rng.integers(4, 65))
            s = int(rng.integers(1, 8))
            groups = [
                sorted(rng.choice(N, size=rng.integers(1, 5), replace=False))
                for _ in range(s)
            ]
            cfg = GroupConfig(groups, N)
            w = rng.uniform(0.1, 5.0, s)
            G = cfg.dense_matrix()
            W = np.diag(np.repeat(w, [len(g) for g in groups]))
            dense = G.T @ W @ G
            assert np.max(np.abs(dense - np.diag(np.diag(dense)))) == 0.0
            assert np.max(np.abs(cfg.gtwg_diagonal(w) - np.diag(dense))) < 1e-14

    def test_membership_counts_is_gtg_diagonal(self):
        cfg = chained_pair_groups(5)
        G = cfg.dense_matrix()
        np.testing.assert_array_equal(
            cfg.membership_counts(), np.diag(G.T @ G)
        )

    def test_builders(self):
        assert contiguous_groups(8, 4).num_groups == 2
        assert chained_pair_groups(8).num_groups == 7
        assert joint_sparsity_groups(3, 2).num_groups == 3
        assert joint_sparsity_groups(3, 2).dim == 6

    def test_tree_groups_cover_details(self):
        phi = OrthogonalTransform("haar", (16,))
        cfg = wavelet_tree_groups(phi)
        # Every child-parent pair stays inside the coefficient vector and
        # every detail coefficient below the coarsest level is a child.
        assert cfg.dim == 16
        children = {g[0] for g in cfg.groups}
        assert children == set(range(2, 16))

    def test_invalid_groups_rejected(self):
        with pytest.raises(ConfigError):
            GroupConfig([[0, 5]], 4)
        with pytest.raises(ConfigError):
            identity_groups(3).gtwg_diagonal([1.0, -1.0, 1.0])
        with pytest.raises(ConfigError):
            contiguous_groups(10, 4)
