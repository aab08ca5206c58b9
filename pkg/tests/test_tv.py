"""Total-variation reweighted solver, penta-diagonal assembly, ILU."""

import numpy as np
import pytest

from firls.exceptions import ConfigError, SingularFactorError
from firls.metrics import relative_error
from firls.operators import DenseOperator, FiniteDifferenceOperator
from firls.pcg import PcgConfig, identity_preconditioner, pcg_solve
from firls.tv import (
    ILUFactors,
    PentaDiagonalMatrix,
    TvProblem,
    firls_tv_solve,
    ilu_factor,
    ilu_inverse_apply,
    tv_objective,
    tv_penta_assemble,
    tv_surrogate,
    tv_system_apply,
    tv_update_weights,
)

RNG = np.random.default_rng(21)


def _dense_tv_matrix(side, weights, lam, abar):
    D1 = FiniteDifferenceOperator(side, 1).dense_matrix()
    D2 = FiniteDifferenceOperator(side, 2).dense_matrix()
    w = np.asarray(weights, dtype=float)
    return abar * np.eye(side * side) \
        + lam * (D1.T * w) @ D1 + lam * (D2.T * w) @ D2


class TestObjectiveAndWeights:
    def test_zero_case(self):
        p = TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=2,
                      lam=1.0)
        assert tv_objective(p, np.zeros(4)) == 0.0

    def test_direct_evaluation(self):
        p = TvProblem(A=DenseOperator(np.zeros((1, 4))), b=np.zeros(1),
                      side=2, lam=1.0)
        x = np.array([1.0, 2.0, 4.0, 4.0])
        # Gradients g1 = [1,1,2,0], g2 = [1,2,3,2].
        expected = np.sqrt(2) + np.sqrt(5) + np.sqrt(13) + 2
        assert tv_objective(p, x) == pytest.approx(expected)

    def test_constant_image_pays_boundary_terms(self):
        side = 3
        p = TvProblem(A=DenseOperator(np.zeros((1, 9))), b=np.zeros(1),
                      side=side, lam=1.0)
        c = 2.5
        x = c * np.ones(9)
        g1 = FiniteDifferenceOperator(side, 1).apply(x)
        g2 = FiniteDifferenceOperator(side, 2).apply(x)
        expected = float(np.sum(np.sqrt(g1**2 + g2**2)))
        assert expected > 0  # identity first rows leave boundary terms
        assert tv_objective(p, x) == pytest.approx(expected)

    def test_weight_examples(self):
        side = 2
        p = TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=side,
                      lam=1.0, eps=1e-30)
        # Pixel with gradients (3, 4): weight 1/5.
        # Construct x = [0, 3, 4, 7]: at the last pixel D1 gives 3, D2
        # gives 4.
        x = np.array([0.0, 3.0, 4.0, 7.0])
        w = tv_update_weights(p, x)
        assert w[3] == pytest.approx(0.2)
        p10 = TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=side,
                        lam=1.0, eps=1e-10)
        w = tv_update_weights(p10, np.zeros(4))
        np.testing.assert_allclose(w, 1e5)

    def test_anisotropic_weights(self):
        p = TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=2,
                      lam=1.0, eps=1e-30, variant="anisotropic")
        x = np.array([0.0, 3.0, 4.0, 7.0])
        w1, w2 = tv_update_weights(p, x)
        assert w1[3] == pytest.approx(1 / 3)
        assert w2[3] == pytest.approx(1 / 4)

    def test_variant_validation(self):
        with pytest.raises(ConfigError):
            TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=2,
                      lam=1.0, variant="diagonal")


class TestPentaAssembly:
    def test_lambda_zero_limit(self):
        P = tv_penta_assemble(2.0, 1e-300, np.ones(9), 3)
        np.testing.assert_allclose(P.a, 2.0, atol=1e-290)
        np.testing.assert_allclose(P.b, 0.0, atol=1e-290)
        np.testing.assert_allclose(P.c, 0.0, atol=1e-290)

    @pytest.mark.parametrize("side", [2, 3, 4])
    def test_matches_dense_assembly(self, side):
        for trial in range(5):
            w = RNG.uniform(0.1, 10.0, side * side)
            lam, abar = RNG.uniform(0.1, 2.0, 2)
            P = tv_penta_assemble(abar, lam, w, side)
            dense = _dense_tv_matrix(side, w, lam, abar)
            assert np.max(np.abs(P.to_dense() - dense)) < 1e-12

    def test_symmetry_and_matvec(self):
        P = tv_penta_assemble(1.0, 0.5, RNG.uniform(0.5, 2.0, 16), 4)
        dense = P.to_dense()
        np.testing.assert_array_equal(dense, dense.T)
        x = RNG.standard_normal(16)
        np.testing.assert_allclose(P.matvec(x), dense @ x, atol=1e-12)
        np.testing.assert_allclose(P.diagonal(), np.diag(dense))

    def test_diagonal_dominance_of_assembled_instances(self):
        for side in (3, 5):
            N = side * side
            w = RNG.uniform(0.1, 10.0, N)
            P = tv_penta_assemble(0.25, 1.7, w, side)
            dense = P.to_dense()
            off = np.sum(np.abs(dense), axis=1) - np.abs(np.diag(dense))
            assert np.all(np.diag(dense) >= off - 1e-12)

    def test_rejects_bad_weights(self):
        with pytest.raises(ConfigError):
            tv_penta_assemble(1.0, 1.0, np.zeros(9), 3)
        with pytest.raises(ConfigError):
            tv_penta_assemble(1.0, 1.0, np.ones(8), 3)


class TestIlu:
    def test_tridiagonal_hand_example(self):
        # No n-band: a = [2, 2], b = [-1]; L gets -0.5, U keeps the bands,
        # and LU differs from P only by the 0.5 fill at the last diagonal.
        P = PentaDiagonalMatrix(a=np.array([2.0, 2.0]), b=np.array([-1.0]),
                                c=np.zeros(0), side=2)
        f = ilu_factor(P)
        np.testing.assert_allclose(f.lower1, [-0.5])
        np.testing.assert_allclose(f.a, [2.0, 2.0])
        np.testing.assert_allclose(f.b, [-1.0])
        LU = f.lower_dense() @ f.upper_dense()
        diff = LU - P.to_dense()
        np.testing.assert_allclose(diff, [[0.0, 0.0], [0.0, 0.5]], atol=1e-15)

    def test_diagonally_dominant_accuracy(self):
        P = tv_penta_assemble(1.0, 0.1, np.ones(9), 3)
        f = ilu_factor(P)
        LU = f.lower_dense() @ f.upper_dense()
        dense = P.to_dense()
        err = np.linalg.norm(LU - dense) / np.linalg.norm(dense)
        assert err < 0.02

    def test_diagonal_limit_is_exact(self):
        P = tv_penta_assemble(3.0, 1e-300, np.ones(16), 4)
        f = ilu_factor(P)
        LU = f.lower_dense() @ f.upper_dense()
        np.testing.assert_allclose(LU, P.to_dense(), atol=1e-290)

    def test_error_shrinks_with_diagonal_dominance(self):
        errs = []
        w = RNG.uniform(0.5, 2.0, 16)
        for abar in (0.1, 1.0, 10.0):
            P = tv_penta_assemble(abar, 1.0, w, 4)
            f = ilu_factor(P)
            LU = f.lower_dense() @ f.upper_dense()
            dense = P.to_dense()
            errs.append(np.linalg.norm(LU - dense) / np.linalg.norm(dense))
        assert errs[0] > errs[1] > errs[2]

    def test_rejects_nonpositive_diagonal(self):
        P = PentaDiagonalMatrix(a=np.array([1.0, 0.0]), b=np.array([0.5]),
                                c=np.zeros(0), side=2)
        with pytest.raises(SingularFactorError):
            ilu_factor(P)

    def test_inverse_apply_identity(self):
        N = 9
        f = ILUFactors(lower1=np.zeros(N - 1), lowern=np.zeros(N - 3),
                       a=np.ones(N), b=np.zeros(N - 1), c=np.zeros(N - 3),
                       side=3)
        r = RNG.standard_normal(N)
        np.testing.assert_allclose(ilu_inverse_apply(f, r), r)

    def test_inverse_apply_matches_dense_solve(self):
        P = tv_penta_assemble(1.0, 0.2, RNG.uniform(0.5, 2.0, 9), 3)
        f = ilu_factor(P)
        L, U = f.lower_dense(), f.upper_dense()
        for _ in range(5):
            r = RNG.standard_normal(9)
            expected = np.linalg.solve(U, np.linalg.solve(L, r))
            np.testing.assert_allclose(ilu_inverse_apply(f, r), expected,
                                       atol=1e-12)

    def test_approximate_inverse_on_tridiagonal(self):
        P = PentaDiagonalMatrix(a=np.array([2.0, 2.0]), b=np.array([-1.0]),
                                c=np.zeros(0), side=2)
        f = ilu_factor(P)
        rng = np.random.default_rng(9)
        for _ in range(10):
            v = rng.standard_normal(2)
            back = ilu_inverse_apply(f, P.matvec(v))
            assert np.linalg.norm(back - v) / np.linalg.norm(v) < 0.3

    def test_ilu_pcg_beats_plain_cg_on_p_itself(self):
        P = tv_penta_assemble(1.0, 0.1, np.ones(9), 3)
        f = ilu_factor(P)
        rhs = RNG.standard_normal(9)
        cfg = PcgConfig(max_iterations=30, relative_residual_tolerance=1e-6)
        plain = pcg_solve(P.matvec, identity_preconditioner, rhs, cfg=cfg)
        ilu = pcg_solve(P.matvec, lambda r: ilu_inverse_apply(f, r), rhs,
                        cfg=cfg)
        assert ilu.iterations_used <= 3
        assert plain.iterations_used >= 6


class TestSystemApply:
    def test_identity_at_lambda_zero(self):
        p = TvProblem(A=DenseOperator(np.eye(4)), b=np.zeros(4), side=2,
                      lam=1e-300)
        x = RNG.standard_normal(4)
        np.testing.assert_allclose(tv_system_apply(p, np.ones(4), x), x,
                                   atol=1e-290)

    def test_matches_dense_oracle(self):
        p = TvProblem(A=DenseOperator(np.zeros((1, 4))), b=np.zeros(1),
                      side=2, lam=1.0)
        dense = _dense_tv_matrix(2, np.ones(4), 1.0, 0.0)
        for _ in range(5):
            x = RNG.standard_normal(4)
            np.testing.assert_allclose(tv_system_apply(p, np.ones(4), x),
                                       dense @ x, atol=1e-12)

    def test_symmetric_bilinear_form(self):
        rng = np.random.default_rng(14)
        A = rng.standard_normal((6, 16))
        p = TvProblem(A=DenseOperator(A), b=np.zeros(6), side=4, lam=0.7)
        w = rng.uniform(0.2, 3.0, 16)
        for _ in range(10):
            x = rng.standard_normal(16)
            y = rng.standard_normal(16)
            lhs = tv_system_apply(p, w, x) @ y
            rhs = x @ tv_system_apply(p, w, y)
            assert abs(lhs - rhs) / max(abs(lhs), 1e-30) < 1e-10


class TestSolver:
    def test_recovers_constant_image(self):
        side = 4
        b = 3.0 * np.ones(16)
        p = TvProblem(A=DenseOperator(np.eye(16)), b=b, side=side, lam=1e-8)
        report = firls_tv_solve(p, outer_iters=10)
        assert relative_error(b, report.x) < 1e-4
        report.assert_monotone()

    def test_converged_solution_satisfies_system(self):
        rng = np.random.default_rng(17)
        side = 8
        A = rng.standard_normal((40, 64)) / np.sqrt(40)
        b = A @ rng.standard_normal(64)
        p = TvProblem(A=DenseOperator(A), b=b, side=side,
                      lam=0.001 * np.max(np.abs(A.T @ b)))
        report = firls_tv_solve(
            p, outer_iters=500,
            pcg_cfg=PcgConfig(max_iterations=60,
                              relative_residual_tolerance=1e-12),
            rel_change_tol=1e-12,
        )
        w = tv_update_weights(p, report.x)
        atb = A.T @ b
        res = np.linalg.norm(tv_system_apply(p, w, report.x) - atb)
        assert res / np.linalg.norm(atb) < 1e-5
        report.assert_monotone()

    def test_majorization_sandwich(self):
        rng = np.random.default_rng(19)
        A = rng.standard_normal((8, 16))
        b = rng.standard_normal(8)
        p = TvProblem(A=DenseOperator(A), b=b, side=4, lam=0.4)
        xk = rng.standard_normal(16)
        w = tv_update_weights(p, xk)
        fk = tv_objective(p, xk)
        assert abs(tv_surrogate(p, xk, w) - fk) < 1e-8 * max(fk, 1.0)
        for _ in range(20):
            x = rng.standard_normal(16)
            assert tv_objective(p, x) <= tv_surrogate(p, x, w) + 1e-9

    def test_anisotropic_solve_is_monotone(self):
        rng = np.random.default_rng(23)
        A = rng.standard_normal((20, 36)) / np.sqrt(20)
        b = A @ rng.standard_normal(36)
        p = TvProblem(A=DenseOperator(A), b=b, side=6,
                      lam=0.01 * np.max(np.abs(A.T @ b)),
                      variant="anisotropic")
        report = firls_tv_solve(p, outer_iters=30)
        report.assert_monotone()

    def test_ilu_pcg_beats_jacobi_on_randomized_trials(self):
        # At n = 32 the ILU-preconditioned inner solve should need no
        # more iterations than Jacobi on at least 90% of random systems.
        from firls.pcg import jacobi_preconditioner

        side = 32
        N = side * side
        rng = np.random.default_rng(29)
        wins = 0
        trials = 10
        for _ in range(trials):
            w = np.exp(rng.uniform(-3.0, 3.0, N))
            abar = 0.25
            lam = 1.0
            P = tv_penta_assemble(abar, lam, w, side)
            f = ilu_factor(P)
            rhs = rng.standard_normal(N)
            cfg = PcgConfig(max_iterations=500,
                            relative_residual_tolerance=1e-8)
            it_ilu = pcg_solve(P.matvec, lambda r: ilu_inverse_apply(f, r),
                               rhs, cfg=cfg).iterations_used
            it_jac = pcg_solve(P.matvec, jacobi_preconditioner(P.diagonal()),
                               rhs, cfg=cfg).iterations_used
            wins += it_ilu <= it_jac
        assert wins >= 0.9 * trials
