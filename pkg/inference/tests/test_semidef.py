import numpy as np
import pytest

from inference.enums.enums import ModelKindEnum
from inference.exceptions import (
    DimensionMismatchError,
    DisconnectedGraphError,
    NotALaplacianError,
    NotAProjectionError,
)
from inference.services.lasso import LassoOptions
from inference.services.linalg import build_q_basis, centering_projector
from inference.services.semidef import (
    SemidefLearner,
    build_semidef_system,
    family_member_semidef,
    learn_ggim_semidef,
    learn_ggim_semidef_path,
    recover_psi_kappa,
    reduce_covariance,
    reduced_residual,
)
from inference.tests.conftest import (
    random_directed_laplacian,
    random_skew,
    random_spd,
    semidef_covariance,
)


def random_member(rng, p):
    """(Sigma, Psi, kappa, L) with Sigma singular along 1 and kappa 1 = 0."""
    q_basis = build_q_basis(p)
    sigma = q_basis.T @ random_spd(rng, p - 1) @ q_basis
    w = rng.uniform(0.5, 2.0, p)
    psi = np.eye(p) - np.outer(np.ones(p), w) / w.sum()
    kappa = q_basis.T @ random_skew(rng, p - 1) @ q_basis
    return sigma, psi, kappa, family_member_semidef(sigma, psi, kappa)


class TestReduceCovariance:
    def test_centering_projector_reduces_to_identity(self):
        reduced = reduce_covariance(centering_projector(4))
        np.testing.assert_allclose(reduced.sigma_bar, np.eye(3), atol=1e-12)

    def test_identity_reduces_to_identity(self):
        np.testing.assert_allclose(reduce_covariance(np.eye(3)).sigma_bar, np.eye(2), atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DisconnectedGraphError):
            reduce_covariance(np.zeros((3, 3)))

    def test_basis_shape(self):
        with pytest.raises(DimensionMismatchError):
            reduce_covariance(np.eye(3), q_basis=np.eye(3))


class TestFamily:
    def test_centering_projector(self):
        projector = centering_projector(3)
        np.testing.assert_allclose(
            family_member_semidef(projector, projector), projector, atol=1e-12
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_members_solve_reduced_equation(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 9))
        sigma, _, _, laplacian = random_member(rng, p)
        assert reduced_residual(laplacian, reduce_covariance(sigma)) < 1e-9
        np.testing.assert_allclose(laplacian.sum(axis=1), 0.0, atol=1e-10)

    def test_transposed_form_is_the_consistent_one(self, rng):
        sigma, _, _, laplacian = random_member(rng, 4)
        reduced = reduce_covariance(sigma)
        laplacian_bar = reduced.Q @ laplacian @ reduced.Q.T
        untransposed = laplacian_bar @ reduced.sigma_bar + reduced.sigma_bar @ laplacian_bar
        assert np.max(np.abs(untransposed - 2.0 * np.eye(3))) > 1e-3
        assert reduced_residual(laplacian, reduced) < 1e-9

    def test_rejects_non_projection(self):
        with pytest.raises(NotAProjectionError):
            family_member_semidef(centering_projector(3), np.eye(3))


class TestSystem:
    def test_row_counts(self):
        projector = centering_projector(2)
        assert build_semidef_system(projector, enforce_row_sums=False).H.shape == (1, 4)
        system = build_semidef_system(projector)
        assert system.H.shape == (3, 4)
        assert system.n_lyapunov_rows == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_members_solve_it(self, seed):
        rng = np.random.default_rng(seed)
        sigma, _, _, laplacian = random_member(rng, 4)
        system = build_semidef_system(sigma)
        np.testing.assert_allclose(
            system.H @ laplacian.reshape(-1, order="F"), system.f, atol=1e-9
        )


class TestRecovery:
    def test_centering_projector(self):
        recovery = recover_psi_kappa(centering_projector(3))
        np.testing.assert_allclose(recovery.psi, centering_projector(3), atol=1e-12)
        np.testing.assert_allclose(recovery.kappa.matrix, 0.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        sigma, psi, kappa, laplacian = random_member(rng, int(rng.integers(3, 7)))
        recovery = recover_psi_kappa(laplacian, sigma)
        np.testing.assert_allclose(recovery.psi, psi, atol=1e-8)
        np.testing.assert_allclose(recovery.kappa.matrix, kappa, atol=1e-8)
        assert recovery.covariance_gap < 1e-8

    def test_non_laplacian(self):
        with pytest.raises(NotALaplacianError):
            recover_psi_kappa(np.eye(3))

    def test_two_components(self):
        block = np.array([[1.0, -1.0], [-1.0, 1.0]])
        with pytest.raises(DisconnectedGraphError):
            recover_psi_kappa(np.kron(np.eye(2), block))


class TestLearnSemidef:
    @pytest.mark.parametrize("seed", range(20))
    def test_exact_covariance_of_a_laplacian(self, seed):
        rng = np.random.default_rng(seed)
        laplacian = random_directed_laplacian(rng, int(rng.integers(3, 6)))
        estimate = learn_ggim_semidef(
            semidef_covariance(laplacian), 1e-8, LassoOptions(tolerance=1e-9, max_sweeps=20000)
        )
        assert estimate.residual < 1e-6
        assert estimate.row_sum_error < 1e-6
        assert estimate.model is ModelKindEnum.SEMIDEF

    def test_large_rho_gives_zero(self):
        [estimate] = learn_ggim_semidef_path(centering_projector(3), [1e6])
        np.testing.assert_array_equal(estimate.L_hat, np.zeros((3, 3)))
        assert estimate.psi_hat is None

    def test_centering_projector(self):
        estimate = learn_ggim_semidef(centering_projector(3), 1e-8)
        assert estimate.residual < 1e-6
        assert estimate.row_sum_error < 1e-6

    def test_learner_matches_function(self):
        learner = SemidefLearner(enforce_row_sums=False)
        expected = learn_ggim_semidef(centering_projector(3), 0.01, enforce_row_sums=False)
        estimate = learner.fit(centering_projector(3), 0.01)
        np.testing.assert_array_equal(estimate.L_hat, expected.L_hat)
