import numpy as np
import pytest

from inference.enums.enums import ModelKindEnum
from inference.exceptions import (
    InvalidParameterError,
    MissingBoundDataError,
    SingularMatrixError,
)
from inference.services.ggim import (
    BoundResult,
    GgimEstimate,
    build_full_system,
    build_reduced_system,
    complete_diagonal,
    compute_bound,
    corollary_bound,
    dominance_alpha,
    family_member,
    learn_ggim,
    learn_ggim_bounded,
    learn_ggim_bounded_path,
    learn_ggim_path,
    optimize_kappa,
    recover_sigma_kappa,
    verify_corollary,
)
from inference.services.lasso import LassoOptions
from inference.services.linalg import (
    SkewSymmetric,
    lyapunov_residual,
    norm_l1_elementwise,
    off_diagonal_positions,
    solve_lyapunov,
    vectorize,
)
from inference.tests.conftest import random_skew, random_spd


class TestFamily:
    def test_zero_kappa_is_precision(self, two_by_two_sigma):
        np.testing.assert_allclose(
            family_member(two_by_two_sigma), [[1.0, -1.0], [-1.0, 2.0]], atol=1e-12
        )

    def test_identity_covariance(self, rng):
        kappa = random_skew(rng, 4)
        np.testing.assert_allclose(family_member(np.eye(4), kappa), np.eye(4) + kappa, atol=1e-12)

    def test_two_by_two_member(self, two_by_two_sigma, two_by_two_laplacian):
        kappa = SkewSymmetric(2, [0.5])
        np.testing.assert_allclose(
            family_member(two_by_two_sigma, kappa), two_by_two_laplacian, atol=1e-12
        )

    @pytest.mark.parametrize("seed", range(100))
    def test_members_share_the_covariance(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 9))
        sigma = random_spd(rng, p)
        laplacian = family_member(sigma, random_skew(rng, p))
        assert lyapunov_residual(laplacian, sigma) < 1e-9

    def test_singular_covariance(self):
        with pytest.raises(SingularMatrixError):
            family_member(np.ones((2, 2)))


class TestOptimizeKappa:
    def test_identity_covariance(self):
        optimum = optimize_kappa(np.eye(3))
        np.testing.assert_allclose(optimum.kappa.matrix, np.zeros((3, 3)), atol=1e-9)
        assert optimum.objective == pytest.approx(3.0)

    def test_two_by_two(self, two_by_two_sigma, two_by_two_laplacian):
        optimum = optimize_kappa(two_by_two_sigma)
        assert optimum.objective == pytest.approx(4.5, abs=1e-8)
        np.testing.assert_allclose(optimum.laplacian, two_by_two_laplacian, atol=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_breakpoint_scan(self, seed):
        rng = np.random.default_rng(seed)
        sigma = random_spd(rng, 2)
        precision = np.linalg.inv(sigma)
        direction = family_member(sigma, SkewSymmetric(2, [1.0])) - precision
        nonzero = np.abs(direction) > 1e-14
        breakpoints = -precision[nonzero] / direction[nonzero]
        best = min(norm_l1_elementwise(precision + k * direction) for k in breakpoints)
        assert optimize_kappa(sigma).objective == pytest.approx(best, abs=1e-8)

    def test_diagonal_covariance_needs_no_kappa(self):
        optimum = optimize_kappa(np.diag([1.0, 2.0, 4.0]))
        np.testing.assert_allclose(optimum.kappa.upper, 0.0, atol=1e-9)


class TestFullSystem:
    def test_two_by_two_identity(self):
        system = build_full_system(np.eye(2))
        np.testing.assert_array_equal(system.H, [[2, 0, 0, 0], [0, 1, 1, 0], [0, 0, 0, 2]])
        np.testing.assert_array_equal(system.f, [2, 0, 2])

    def test_row_count(self):
        system = build_full_system(np.eye(4))
        assert system.H.shape == (10, 16)
        assert len(system.rows) == 10

    @pytest.mark.parametrize("seed", range(5))
    def test_family_members_solve_it(self, seed):
        rng = np.random.default_rng(seed)
        sigma = random_spd(rng, 4)
        laplacian = family_member(sigma, random_skew(rng, 4))
        system = build_full_system(sigma)
        np.testing.assert_allclose(system.H @ vectorize(laplacian), system.f, atol=1e-9)
        assert system.residual(laplacian) < 1e-9


class TestLearnGgim:
    def test_identity_covariance(self):
        estimate = learn_ggim(np.eye(3), 1e-4)
        np.testing.assert_allclose(estimate.L_hat, np.eye(3), atol=1e-3)
        assert estimate.model is ModelKindEnum.GGIM
        assert estimate.recovered

    def test_exact_covariance_fits_at_small_rho(self):
        laplacian = np.array(
            [[1.0, 0.0, 0.0, 0.0], [-0.6, 1.0, 0.0, 0.0], [0.0, -0.5, 1.2, 0.0], [0.3, 0.0, -0.4, 0.9]]
        )
        estimate = learn_ggim(solve_lyapunov(laplacian), 1e-8, LassoOptions(tolerance=1e-9))
        assert estimate.xi < 1e-6

    def test_l1_norm_shrinks_with_rho(self, rng):
        sigma = random_spd(rng, 4)
        norms = [norm_l1_elementwise(e.L_hat) for e in learn_ggim_path(sigma, [1.0, 0.1, 0.01])]
        assert norms[0] <= norms[1] + 1e-8
        assert norms[1] <= norms[2] + 1e-8

    def test_path_matches_single_fits(self, rng):
        sigma = random_spd(rng, 3)
        [path_estimate] = learn_ggim_path(sigma, [0.05])
        np.testing.assert_allclose(path_estimate.L_hat, learn_ggim(sigma, 0.05).L_hat, atol=1e-8)


class TestRecovery:
    def test_identity(self):
        recovery = recover_sigma_kappa(np.eye(3))
        np.testing.assert_allclose(recovery.sigma, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(recovery.kappa.matrix, 0.0, atol=1e-12)

    def test_two_by_two(self, two_by_two_sigma, two_by_two_laplacian):
        recovery = recover_sigma_kappa(two_by_two_laplacian)
        np.testing.assert_allclose(recovery.sigma, two_by_two_sigma, atol=1e-10)
        assert recovery.kappa.entry(0, 1) == pytest.approx(0.5)
        assert recovery.symmetric_defect < 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        sigma = random_spd(rng, 4)
        kappa = random_skew(rng, 4)
        recovery = recover_sigma_kappa(family_member(sigma, kappa))
        np.testing.assert_allclose(recovery.sigma, sigma, atol=1e-8)
        np.testing.assert_allclose(recovery.kappa.matrix, kappa, atol=1e-8)

    def test_unstable_estimate_is_kept_without_recovery(self):
        # S = -I is not a covariance, but the system is still solvable; L_hat = -I is unstable
        estimate = learn_ggim(-np.eye(2), 0.0)
        assert not estimate.recovered
        np.testing.assert_allclose(estimate.L_hat, -np.eye(2), atol=1e-8)


class TestReducedSystem:
    def test_diagonal_covariance_has_no_right_side(self):
        system = build_reduced_system(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(system.beta, np.zeros(3))
        assert system.H_tilde.shape == (3, 6)

    @pytest.mark.parametrize("seed", range(5))
    def test_family_members_solve_it(self, seed):
        rng = np.random.default_rng(seed)
        sigma = random_spd(rng, 3)
        laplacian = family_member(sigma, random_skew(rng, 3))
        system = build_reduced_system(sigma)
        zeta = np.array([laplacian[row, col] for row, col in system.positions])
        np.testing.assert_allclose(system.H_tilde @ zeta, system.beta, atol=1e-10)

    def test_non_positive_diagonal(self):
        with pytest.raises(InvalidParameterError):
            build_reduced_system(np.diag([1.0, 0.0]))


class TestCompleteDiagonal:
    def test_zero_off_diagonal(self):
        completion = complete_diagonal(np.zeros(6), np.eye(3))
        np.testing.assert_allclose(completion.diagonal, np.ones(3))
        np.testing.assert_array_equal(completion.epsilon, np.zeros(3))

    def test_lift(self):
        # L_12 = 1.5 gives nu_r = nu_c = 1.5
        zeta = np.zeros(2)
        zeta[off_diagonal_positions(2).index((0, 1))] = 1.5
        completion = complete_diagonal(zeta, np.eye(2), delta=0.01)
        np.testing.assert_allclose(completion.diagonal, [3.01, 3.01])
        np.testing.assert_allclose(completion.epsilon, [2.01, 2.01])

    def test_wrong_length(self):
        with pytest.raises(InvalidParameterError):
            complete_diagonal(np.zeros(3), np.eye(2))

    def test_negative_delta(self):
        with pytest.raises(InvalidParameterError):
            complete_diagonal(np.zeros(2), np.eye(2), delta=-1.0)


class TestLearnGgimBounded:
    def test_identity_covariance(self):
        estimate = learn_ggim_bounded(np.eye(3), 0.1)
        np.testing.assert_allclose(estimate.L_hat, np.eye(3), atol=1e-12)
        assert estimate.xi == pytest.approx(0.0, abs=1e-12)
        assert estimate.alpha == pytest.approx(2.0)
        assert estimate.model is ModelKindEnum.GGIM_BOUNDED

    def test_diagonal_covariance(self):
        estimate = learn_ggim_bounded(np.diag([2.0, 1.0]), 0.1)
        np.testing.assert_allclose(estimate.L_hat, np.diag([0.5, 1.0]), atol=1e-12)
        assert estimate.xi == pytest.approx(0.0, abs=1e-12)

    def test_estimates_are_diagonally_dominant(self, rng):
        for estimate in learn_ggim_bounded_path(random_spd(rng, 4), [0.1, 0.01, 0.001]):
            assert estimate.alpha is not None and estimate.alpha > 0
            assert np.all(np.diag(estimate.L_hat) > 0)

    def test_dominance_alpha_of_identity(self):
        assert dominance_alpha(np.eye(3)) == pytest.approx(2.0)

    @pytest.mark.parametrize("seed", range(50))
    def test_covariance_bound_holds(self, seed):
        rng = np.random.default_rng(seed)
        sigma = random_spd(rng, int(rng.integers(3, 7)))
        for rho in (1e-3, 1e-2, 1e-1):
            estimate = learn_ggim_bounded(sigma, rho)
            if estimate.alpha is None or not estimate.recovered:
                continue
            result = compute_bound(estimate, sigma)
            assert result.holds, (rho, result)


class TestBounds:
    def test_missing_alpha(self):
        estimate = learn_ggim(np.eye(2), 0.01)
        with pytest.raises(MissingBoundDataError):
            compute_bound(estimate, np.eye(2))

    def test_missing_covariance(self):
        estimate = GgimEstimate(L_hat=np.eye(2), rho=0.1, xi=0.0, converged=True, alpha=2.0)
        with pytest.raises(MissingBoundDataError):
            compute_bound(estimate, np.eye(2))

    def test_corollary_adds_lambda(self):
        result = BoundResult(xi=0.6, alpha=2.0, bound=0.3, lhs=0.1, holds=True)
        assert corollary_bound(result, 0.0) == pytest.approx(0.3)
        assert corollary_bound(result, 0.1) == pytest.approx(0.4)
        with pytest.raises(InvalidParameterError):
            corollary_bound(result, -0.1)

    def test_verify_corollary(self):
        result = BoundResult(xi=0.6, alpha=2.0, bound=0.3, lhs=0.1, holds=True)
        check = verify_corollary(result, 0.1, np.eye(2), np.eye(2) + 0.35)
        assert check.lhs == pytest.approx(0.35)
        assert check.holds
        assert not verify_corollary(result, 0.0, np.eye(2), np.eye(2) + 0.35).holds
