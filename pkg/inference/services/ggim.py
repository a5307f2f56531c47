# inference/services/ggim.py
"""
Gaussian graphical interaction models.

A stable Laplacian L has steady-state covariance Sigma when
L Sigma + Sigma L^T = 2 I. For a given Sigma every such L is a member of the
family (I + kappa) Sigma^{-1}, kappa skew-symmetric; the interaction model is
the sparsest member. From data the family is searched through the LASSO on
the Lyapunov equation written with the sample covariance S.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from inference.enums.enums import ModelKindEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import (
    InvalidParameterError,
    LinearProgramError,
    MissingBoundDataError,
    NotDiagonallyDominantError,
    SingularMatrixError,
    UnstableLaplacianError,
)
from inference.services.export import LAPLACIAN, extract_edges
from inference.services.lasso import LassoProblem, rho_path, solve_lasso
from inference.services.linalg import (
    SkewSymmetric,
    as_square,
    diag_dominance_alpha,
    kronecker,
    lyapunov_operator,
    norm_l1_elementwise,
    norm_linf_elementwise,
    off_diagonal_positions,
    solve_lyapunov,
    unvectorize,
    upper_pairs,
)

logger = logging.getLogger(__name__)


def precision_matrix(sigma):
    sigma = as_square(sigma, "Sigma")
    try:
        return scipy.linalg.solve(sigma, np.eye(sigma.shape[0]), assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"Sigma is not positive definite: {exc}") from exc


def _as_skew(kappa, p):
    if kappa is None:
        return SkewSymmetric.zeros(p)
    if isinstance(kappa, SkewSymmetric):
        return kappa
    return SkewSymmetric.from_matrix(kappa)


def family_member(sigma, kappa=None):
    """L = (I + kappa) Sigma^{-1}; every member shares the steady-state covariance Sigma."""
    precision = precision_matrix(sigma)
    p = precision.shape[0]
    kappa = _as_skew(kappa, p)
    return (np.eye(p) + kappa.matrix) @ precision


class KappaOptimum(NamedTuple):
    kappa: SkewSymmetric
    laplacian: np.ndarray
    objective: float


def optimize_kappa(sigma):
    """
    Sparsest family member in the elementwise l1 sense.

    ||P + kappa P||_1 is piecewise linear in the free entries k of kappa, so
    it is minimised exactly by the linear program
    min 1^T t  s.t.  -t <= vec(P) + B k <= t.
    """
    precision = precision_matrix(sigma)
    p = precision.shape[0]
    pairs = upper_pairs(p)
    if not pairs:
        return KappaOptimum(SkewSymmetric.zeros(p), precision, norm_l1_elementwise(precision))

    n_free, n_entries = len(pairs), p * p
    # column (i, j): kappa_ij = 1 adds P[j, :] to row i and -P[i, :] to row j
    coupling = np.zeros((n_entries, n_free))
    for column, (i, j) in enumerate(pairs):
        delta = np.zeros((p, p))
        delta[i, :] = precision[j, :]
        delta[j, :] = -precision[i, :]
        coupling[:, column] = delta.ravel()
    base = precision.ravel()

    identity = np.eye(n_entries)
    cost = np.concatenate([np.zeros(n_free), np.ones(n_entries)])
    a_ub = np.block([[coupling, -identity], [-coupling, -identity]])
    b_ub = np.concatenate([-base, base])
    bounds = [(None, None)] * n_free + [(0, None)] * n_entries

    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not result.success:
        raise LinearProgramError(f"kappa optimisation failed: {result.message}")

    kappa = SkewSymmetric(p, result.x[:n_free])
    laplacian = family_member(sigma, kappa)
    return KappaOptimum(kappa, laplacian, norm_l1_elementwise(laplacian))


@dataclass(frozen=True)
class FullSystem:
    """H vec(L) = f: one row per entry (i, j), i <= j, of L S + S L^T = 2 I."""

    H: np.ndarray
    f: np.ndarray
    p: int

    @property
    def rows(self):
        return [(i, j) for i in range(self.p) for j in range(i, self.p)]

    def residual(self, laplacian):
        z = np.asarray(laplacian, dtype=float).reshape(-1, order="F")
        return float(np.linalg.norm(self.f - self.H @ z))


def build_full_system(covariance):
    s = as_square(covariance, "S")
    p = s.shape[0]
    rows = [(i, j) for i in range(p) for j in range(i, p)]
    H = np.zeros((len(rows), p * p))
    f = np.zeros(len(rows))
    columns = np.arange(p) * p
    for row, (i, j) in enumerate(rows):
        # sum_m L_im S_mj + sum_m L_jm S_mi
        H[row, i + columns] += s[:, j]
        H[row, j + columns] += s[:, i]
        f[row] = 2.0 if i == j else 0.0
    return FullSystem(H, f, p)


class Recovery(NamedTuple):
    sigma: np.ndarray
    kappa: SkewSymmetric
    symmetric_defect: float


def recover_sigma_kappa(laplacian):
    """Sigma from the Lyapunov equation of L, then kappa as the skew part of L Sigma - I."""
    laplacian = as_square(laplacian, "L")
    sigma = solve_lyapunov(laplacian)
    defect = laplacian @ sigma - np.eye(laplacian.shape[0])
    symmetric = 0.5 * (defect + defect.T)
    return Recovery(sigma, SkewSymmetric.from_matrix(defect), norm_linf_elementwise(symmetric))


@dataclass
class GgimEstimate:
    L_hat: np.ndarray
    rho: float
    xi: float
    converged: bool
    sigma_hat: Optional[np.ndarray] = None
    kappa_hat: Optional[SkewSymmetric] = None
    symmetric_defect: Optional[float] = None
    alpha: Optional[float] = None
    epsilon: Optional[np.ndarray] = None
    delta: Optional[float] = None
    model: ModelKindEnum = ModelKindEnum.GGIM

    @property
    def p(self):
        return self.L_hat.shape[0]

    @property
    def recovered(self):
        return self.sigma_hat is not None

    def edges(self, orientation=OrientationEnum.SENDING, tolerance=None, names=None):
        return extract_edges(self.L_hat, LAPLACIAN, orientation, tolerance, names)


def _attach_recovery(estimate):
    try:
        recovery = recover_sigma_kappa(estimate.L_hat)
    except (UnstableLaplacianError, SingularMatrixError) as exc:
        logger.warning("no covariance recovered for the rho=%g estimate: %s", estimate.rho, exc)
        return estimate
    estimate.sigma_hat = recovery.sigma
    estimate.kappa_hat = recovery.kappa
    estimate.symmetric_defect = recovery.symmetric_defect
    return estimate


def _ggim_estimate(system, solution):
    laplacian = unvectorize(solution.x, system.p, system.p)
    estimate = GgimEstimate(
        L_hat=laplacian,
        rho=solution.rho,
        xi=system.residual(laplacian),
        converged=solution.converged,
    )
    return _attach_recovery(estimate)


def learn_ggim(covariance, rho, options=None):
    """LASSO on H vec(L) = f; the estimate carries the recovered (Sigma, kappa) when L is stable."""
    system = build_full_system(covariance)
    solution = solve_lasso(LassoProblem(system.H, system.f, rho), options)
    return _ggim_estimate(system, solution)


def learn_ggim_path(covariance, rhos, options=None):
    system = build_full_system(covariance)
    solutions = rho_path(LassoProblem(system.H, system.f), rhos, options)
    return [_ggim_estimate(system, solution) for solution in solutions]


@dataclass(frozen=True)
class ReducedSystem:
    """Off-diagonal Lyapunov equations with the diagonal of L eliminated."""

    H_tilde: np.ndarray
    beta: np.ndarray
    p: int
    covariance: np.ndarray

    @property
    def positions(self):
        return off_diagonal_positions(self.p)


def _positive_diagonal(covariance):
    s = as_square(covariance, "S")
    if np.any(np.diag(s) <= 0):
        raise InvalidParameterError("S has a non-positive diagonal entry")
    return s


def build_reduced_system(covariance):
    """
    One row per pair j < k of the off-diagonal Lyapunov equation after
    substituting L_ii = (1 - sum_{m != i} L_im S_mi) / S_ii.

    The coefficient on L_jm is S_jk S_jm / S_jj - S_km (and symmetrically on
    L_km); the right side is S_jk / S_jj + S_jk / S_kk.
    """
    s = _positive_diagonal(covariance)
    p = s.shape[0]
    positions = off_diagonal_positions(p)
    column_of = {position: column for column, position in enumerate(positions)}
    pairs = upper_pairs(p)
    H_tilde = np.zeros((len(pairs), len(positions)))
    beta = np.zeros(len(pairs))
    for row, (j, k) in enumerate(pairs):
        for m in range(p):
            if m != j:
                H_tilde[row, column_of[(j, m)]] += s[j, k] * s[j, m] / s[j, j] - s[k, m]
            if m != k:
                H_tilde[row, column_of[(k, m)]] += s[j, k] * s[k, m] / s[k, k] - s[j, m]
        beta[row] = s[j, k] / s[j, j] + s[j, k] / s[k, k]
    return ReducedSystem(H_tilde, beta, p, s)


class DiagonalCompletion(NamedTuple):
    diagonal: np.ndarray
    epsilon: np.ndarray
    delta: float


def _off_diagonal_matrix(zeta, p):
    laplacian = np.zeros((p, p))
    for value, (row, col) in zip(np.asarray(zeta, dtype=float).ravel(), off_diagonal_positions(p)):
        laplacian[row, col] = value
    return laplacian


def complete_diagonal(zeta, covariance, delta=None):
    """
    Diagonal of L from the diagonal Lyapunov equations, lifted by epsilon so
    that every L_ii exceeds nu_r + nu_c, the largest off-diagonal absolute
    row and column sums.
    """
    s = _positive_diagonal(covariance)
    p = s.shape[0]
    zeta = np.asarray(zeta, dtype=float).ravel()
    if zeta.size != p * (p - 1) or not np.all(np.isfinite(zeta)):
        raise InvalidParameterError(f"expected {p * (p - 1)} finite off-diagonal values")
    off = _off_diagonal_matrix(zeta, p)
    base = (1.0 - np.einsum("im,mi->i", off, s)) / np.diag(s)
    magnitudes = np.abs(off)
    nu_r = float(magnitudes.sum(axis=1).max())
    nu_c = float(magnitudes.sum(axis=0).max())
    if delta is None:
        delta = 1e-6 * (1.0 + nu_r + nu_c)
    if delta < 0:
        raise InvalidParameterError("delta must be non-negative")
    epsilon = np.maximum(0.0, nu_r + nu_c + delta - base)
    return DiagonalCompletion(base + epsilon, epsilon, float(delta))


def dominance_alpha(laplacian):
    """
    Dominance margin used by the covariance bound.

    The smaller of the margins of I kron L + L^T kron I and of the Lyapunov
    operator I kron L + L kron I, which maps vec(Sigma_hat - S) to the
    equation residual.
    """
    laplacian = as_square(laplacian, "L")
    identity = np.eye(laplacian.shape[0])
    sylvester = kronecker(identity, laplacian) + kronecker(laplacian.T, identity)
    return min(diag_dominance_alpha(sylvester), diag_dominance_alpha(lyapunov_operator(laplacian)))


def _bounded_estimate(reduced, full, solution, delta):
    p = reduced.p
    completion = complete_diagonal(solution.x, reduced.covariance, delta)
    laplacian = _off_diagonal_matrix(solution.x, p)
    laplacian[np.diag_indices(p)] = completion.diagonal
    try:
        alpha = dominance_alpha(laplacian)
    except NotDiagonallyDominantError as exc:
        logger.warning("bounded estimate is not diagonally dominant: %s", exc)
        alpha = None
    estimate = GgimEstimate(
        L_hat=laplacian,
        rho=solution.rho,
        xi=full.residual(laplacian),
        converged=solution.converged,
        alpha=alpha,
        epsilon=completion.epsilon,
        delta=completion.delta,
        model=ModelKindEnum.GGIM_BOUNDED,
    )
    return _attach_recovery(estimate)


def learn_ggim_bounded(covariance, rho, delta=None, options=None):
    reduced = build_reduced_system(covariance)
    full = build_full_system(covariance)
    solution = solve_lasso(LassoProblem(reduced.H_tilde, reduced.beta, rho), options)
    return _bounded_estimate(reduced, full, solution, delta)


def learn_ggim_bounded_path(covariance, rhos, delta=None, options=None):
    reduced = build_reduced_system(covariance)
    full = build_full_system(covariance)
    solutions = rho_path(LassoProblem(reduced.H_tilde, reduced.beta), rhos, options)
    return [_bounded_estimate(reduced, full, solution, delta) for solution in solutions]


class GgimLearner:
    """Fits GGIM estimates with one set of LASSO options."""

    model = ModelKindEnum.GGIM

    def __init__(self, options=None):
        self.options = options

    def fit(self, covariance, rho):
        return learn_ggim(covariance, rho, self.options)

    def fit_path(self, covariance, rhos):
        return learn_ggim_path(covariance, rhos, self.options)


class BoundedGgimLearner(GgimLearner):
    model = ModelKindEnum.GGIM_BOUNDED

    def __init__(self, options=None, delta=None):
        super().__init__(options)
        self.delta = delta

    def fit(self, covariance, rho):
        return learn_ggim_bounded(covariance, rho, delta=self.delta, options=self.options)

    def fit_path(self, covariance, rhos):
        return learn_ggim_bounded_path(covariance, rhos, delta=self.delta, options=self.options)


@dataclass(frozen=True)
class BoundResult:
    xi: float
    alpha: float
    bound: float
    lhs: float
    holds: bool


def compute_bound(estimate, covariance):
    """Checks ||Sigma_hat - S||_inf <= xi / alpha for a bounded estimate."""
    if estimate.alpha is None:
        raise MissingBoundDataError("estimate has no dominance margin alpha")
    if estimate.sigma_hat is None:
        raise MissingBoundDataError("estimate has no recovered covariance")
    s = as_square(covariance, "S")
    bound = estimate.xi / estimate.alpha
    lhs = norm_linf_elementwise(estimate.sigma_hat - s)
    return BoundResult(estimate.xi, estimate.alpha, bound, lhs, lhs <= bound + 1e-12)


def corollary_bound(bound_result, lam):
    """xi / alpha + lambda, the distance bound to an l1-penalised likelihood estimate."""
    if lam < 0:
        raise InvalidParameterError("lambda must be non-negative")
    return bound_result.bound + lam


class CorollaryCheck(NamedTuple):
    bound: float
    lhs: float
    holds: bool


def verify_corollary(bound_result, lam, sigma_hat, sigma_tilde):
    bound = corollary_bound(bound_result, lam)
    lhs = norm_linf_elementwise(as_square(sigma_tilde, "Sigma_tilde") - as_square(sigma_hat, "Sigma_hat"))
    return CorollaryCheck(bound, lhs, lhs <= bound + 1e-12)
