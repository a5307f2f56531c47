# inference/services/semidef.py
"""
Interaction models for positive semi-definite covariances.

When the Laplacian has zero row sums the stationary covariance is singular
along the all-ones vector. Everything is then expressed on the orthogonal
complement of 1 through the Helmert basis Q: Sigma_bar = Q Sigma Q^T and
L_bar = Q L Q^T satisfy L_bar Sigma_bar + Sigma_bar L_bar^T = 2 I.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from inference.conf import inference_settings
from inference.enums.enums import DefinitenessEnum, ModelKindEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import (
    DimensionMismatchError,
    DisconnectedGraphError,
    NotALaplacianError,
    NotAProjectionError,
    SingularMatrixError,
    UnstableLaplacianError,
)
from inference.services.export import LAPLACIAN, extract_edges
from inference.services.lasso import LassoProblem, rho_path, solve_lasso
from inference.services.linalg import (
    SkewSymmetric,
    as_square,
    build_q_basis,
    classify_definiteness,
    norm_linf_elementwise,
    solve_lyapunov,
    unvectorize,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReducedCovariance:
    sigma_bar: np.ndarray
    Q: np.ndarray
    p: int


def reduce_covariance(covariance, q_basis=None):
    s = as_square(covariance, "S")
    p = s.shape[0]
    q_basis = build_q_basis(p) if q_basis is None else _as_q_basis(q_basis, p)
    scale = max(1.0, norm_linf_elementwise(s))
    if norm_linf_elementwise(s @ np.ones((p, 1))) > 1e-8 * scale:
        logger.warning("S does not annihilate the all-ones vector; reducing it anyway")
    sigma_bar = q_basis @ s @ q_basis.T
    sigma_bar = 0.5 * (sigma_bar + sigma_bar.T)
    if classify_definiteness(sigma_bar) is not DefinitenessEnum.POSITIVE_DEFINITE:
        raise DisconnectedGraphError(
            "the reduced covariance is singular; the process is not connected"
        )
    return ReducedCovariance(sigma_bar, q_basis, p)


def _as_q_basis(q_basis, p):
    q_basis = np.asarray(q_basis, dtype=float)
    if q_basis.shape != (p - 1, p):
        raise DimensionMismatchError(f"Q must be {p - 1}x{p}, got {q_basis.shape}")
    return q_basis


def _check_projection(psi):
    p = psi.shape[0]
    scale = max(1.0, norm_linf_elementwise(psi))
    if norm_linf_elementwise(psi @ psi - psi) > 1e-9 * scale:
        raise NotAProjectionError("Psi is not idempotent")
    if norm_linf_elementwise(psi @ np.ones(p)[:, None]) > 1e-9 * scale:
        raise NotAProjectionError("Psi does not annihilate the all-ones vector")


def family_member_semidef(sigma, psi, kappa=None):
    """L = Psi (I + kappa) Sigma^+ with Sigma^+ the pseudo-inverse."""
    sigma = as_square(sigma, "Sigma")
    psi = as_square(psi, "Psi")
    p = sigma.shape[0]
    if psi.shape != sigma.shape:
        raise DimensionMismatchError(f"Psi is {psi.shape}, Sigma is {sigma.shape}")
    _check_projection(psi)
    if kappa is None:
        kappa = SkewSymmetric.zeros(p)
    elif not isinstance(kappa, SkewSymmetric):
        kappa = SkewSymmetric.from_matrix(kappa)
    return psi @ (np.eye(p) + kappa.matrix) @ scipy.linalg.pinvh(sigma)


def reduced_residual(laplacian, reduced):
    q_basis = reduced.Q
    laplacian_bar = q_basis @ laplacian @ q_basis.T
    sigma_bar = reduced.sigma_bar
    identity = np.eye(reduced.p - 1)
    return norm_linf_elementwise(
        laplacian_bar @ sigma_bar + sigma_bar @ laplacian_bar.T - 2.0 * identity
    )


@dataclass(frozen=True)
class SemidefSystem:
    H: np.ndarray
    f: np.ndarray
    reduced: ReducedCovariance
    n_lyapunov_rows: int

    @property
    def p(self):
        return self.reduced.p


def build_semidef_system(covariance, enforce_row_sums=True):
    """
    Upper triangle of L_bar Sigma_bar + Sigma_bar L_bar^T = 2 I over vec(L),
    followed by the p row-sum equations L 1 = 0 when ``enforce_row_sums``.
    """
    reduced = reduce_covariance(covariance)
    p, q_basis, sigma_bar = reduced.p, reduced.Q, reduced.sigma_bar
    rows, cols = np.triu_indices(p - 1)
    lyapunov = np.zeros((rows.size, p * p))
    for col in range(p):
        for row in range(p):
            # L = e_row e_col^T maps to L_bar = q_row q_col^T
            laplacian_bar = np.outer(q_basis[:, row], q_basis[:, col])
            image = laplacian_bar @ sigma_bar + sigma_bar @ laplacian_bar.T
            lyapunov[:, row + col * p] = image[rows, cols]
    rhs = np.where(rows == cols, 2.0, 0.0)

    if enforce_row_sums:
        row_sums = np.zeros((p, p * p))
        for row in range(p):
            row_sums[row, row + np.arange(p) * p] = 1.0
        H = np.vstack([lyapunov, row_sums])
        f = np.concatenate([rhs, np.zeros(p)])
    else:
        H, f = lyapunov, rhs
    return SemidefSystem(H, f, reduced, rows.size)


class PsiKappa(NamedTuple):
    psi: np.ndarray
    kappa: SkewSymmetric
    sigma_bar: np.ndarray
    covariance_gap: Optional[float]


def recover_psi_kappa(laplacian, covariance=None):
    """
    Projection and skew part of a Laplacian estimate.

    Psi = I - 1 w^T / (w^T 1) with w the left null vector of L, so that
    Psi L = L. kappa = Q^T skew(L_bar Sigma_bar - I) Q with Sigma_bar the
    reduced Lyapunov solution; ``covariance_gap`` compares Sigma_bar with
    Q S Q^T when S is given.
    """
    laplacian = as_square(laplacian, "L")
    p = laplacian.shape[0]
    scale = max(1.0, norm_linf_elementwise(laplacian))
    row_sums = laplacian @ np.ones(p)
    if np.max(np.abs(row_sums)) > inference_settings.ROW_SUM_TOLERANCE * scale:
        raise NotALaplacianError(
            f"row sums of L reach {np.max(np.abs(row_sums)):.3g}; not a Laplacian"
        )
    left, singular_values, _ = scipy.linalg.svd(laplacian)
    if p > 1 and singular_values[-2] <= inference_settings.ROW_SUM_TOLERANCE * scale:
        raise DisconnectedGraphError("L has more than one zero singular value")
    w = left[:, -1]
    mass = w.sum()
    if abs(mass) <= 1e-12:
        raise DisconnectedGraphError("left null vector of L is orthogonal to the all-ones vector")
    psi = np.eye(p) - np.outer(np.ones(p), w) / mass

    q_basis = build_q_basis(p)
    laplacian_bar = q_basis @ laplacian @ q_basis.T
    sigma_bar = solve_lyapunov(laplacian_bar)
    skew = SkewSymmetric.from_matrix(laplacian_bar @ sigma_bar - np.eye(p - 1))
    kappa = SkewSymmetric.from_matrix(q_basis.T @ skew.matrix @ q_basis)

    gap = None
    if covariance is not None:
        s = as_square(covariance, "S")
        gap = norm_linf_elementwise(sigma_bar - q_basis @ s @ q_basis.T)
    return PsiKappa(psi, kappa, sigma_bar, gap)


@dataclass
class SemidefGgimEstimate:
    L_hat: np.ndarray
    rho: float
    residual: float
    row_sum_error: float
    converged: bool
    psi_hat: Optional[np.ndarray] = None
    kappa_hat: Optional[SkewSymmetric] = None
    model: ModelKindEnum = ModelKindEnum.SEMIDEF

    @property
    def p(self):
        return self.L_hat.shape[0]

    def edges(self, orientation=OrientationEnum.SENDING, tolerance=None, names=None):
        return extract_edges(self.L_hat, LAPLACIAN, orientation, tolerance, names)


def _semidef_estimate(system, solution, covariance):
    laplacian = unvectorize(solution.x, system.p, system.p)
    estimate = SemidefGgimEstimate(
        L_hat=laplacian,
        rho=solution.rho,
        residual=reduced_residual(laplacian, system.reduced),
        row_sum_error=float(np.max(np.abs(laplacian.sum(axis=1)))),
        converged=solution.converged,
    )
    try:
        recovery = recover_psi_kappa(laplacian, covariance)
    except (
        NotALaplacianError,
        DisconnectedGraphError,
        UnstableLaplacianError,
        SingularMatrixError,
    ) as exc:
        logger.warning("no projection recovered for the rho=%g estimate: %s", solution.rho, exc)
        return estimate
    estimate.psi_hat = recovery.psi
    estimate.kappa_hat = recovery.kappa
    return estimate


def learn_ggim_semidef(covariance, rho, options=None, enforce_row_sums=True):
    system = build_semidef_system(covariance, enforce_row_sums)
    solution = solve_lasso(LassoProblem(system.H, system.f, rho), options)
    return _semidef_estimate(system, solution, covariance)


def learn_ggim_semidef_path(covariance, rhos, options=None, enforce_row_sums=True):
    system = build_semidef_system(covariance, enforce_row_sums)
    solutions = rho_path(LassoProblem(system.H, system.f), rhos, options)
    return [_semidef_estimate(system, solution, covariance) for solution in solutions]


class SemidefLearner:
    """GGIM learner for a singular covariance whose null space is the ones vector."""

    model = ModelKindEnum.SEMIDEF

    def __init__(self, options=None, enforce_row_sums=True):
        self.options = options
        self.enforce_row_sums = enforce_row_sums

    def fit(self, covariance, rho):
        return learn_ggim_semidef(covariance, rho, self.options, self.enforce_row_sums)

    def fit_path(self, covariance, rhos):
        return learn_ggim_semidef_path(covariance, rhos, self.options, self.enforce_row_sums)
