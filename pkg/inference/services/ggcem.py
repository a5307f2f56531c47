# inference/services/ggcem.py
"""
Gaussian graphical conditional expectation models.

For every pair a = (j, k) the conditional expectation block
P~_aa = L_aa + Sigma_ab Sigma_bb^{-1} (P_ba - L_ba), P = Sigma^{-1}, satisfies
P~_aa Sigma_{a|b} + Sigma_{a|b} P~_aa^T = 2 I. Eliminating the diagonal of the
block leaves one linear balance equation per pair in the two off-diagonal
entries. Estimates are reported adjacency-signed (y = -P~ off the diagonal).
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from inference.conf import inference_settings
from inference.enums.enums import ModelKindEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import DimensionMismatchError, NotInFamilyError, SingularMatrixError
from inference.services.export import ADJACENCY, extract_edges
from inference.services.lasso import LassoProblem, rho_path, solve_lasso
from inference.services.linalg import (
    CovarianceMatrix,
    as_square,
    conditional_covariance,
    conditional_stats,
    lyapunov_residual,
    off_diagonal_positions,
    regression_block,
    upper_pairs,
)

logger = logging.getLogger(__name__)


def _require_positive_definite(covariance):
    if not isinstance(covariance, CovarianceMatrix):
        covariance = CovarianceMatrix(as_square(covariance, "S"))
    if not covariance.is_positive_definite:
        raise SingularMatrixError(
            f"conditional expectation models need a positive definite S ({covariance.definiteness.value})"
        )
    return covariance.values


def conditional_expectation_matrix(sigma, laplacian, j, k):
    sigma = as_square(sigma, "Sigma")
    laplacian = as_square(laplacian, "L")
    coefficients, a, b = regression_block(sigma, j, k)
    block = laplacian[np.ix_(a, a)]
    if not b:
        return block
    precision = np.linalg.inv(sigma)
    return block + coefficients @ (precision[np.ix_(b, a)] - laplacian[np.ix_(b, a)])


def _balance_row(stats):
    s_j, s_k, s_jk = stats.sigma_j_given_c, stats.sigma_k_given_c, stats.sigma_jk_given_c
    coefficient_jk = s_k - s_jk ** 2 / s_j
    coefficient_kj = s_j - s_jk ** 2 / s_k
    return coefficient_jk, coefficient_kj, s_jk / s_j + s_jk / s_k


def verify_balance(sigma, laplacian, strict=True, tolerance=None):
    """
    Largest pairwise violation of the conditional balance equations.

    With ``strict`` a Laplacian whose Lyapunov residual against Sigma exceeds
    ``tolerance`` is refused with NotInFamilyError.
    """
    sigma = _require_positive_definite(sigma)
    laplacian = as_square(laplacian, "L")
    if tolerance is None:
        tolerance = inference_settings.LYAPUNOV_CHECK_TOLERANCE
    residual = lyapunov_residual(laplacian, sigma)
    if strict and residual > tolerance:
        raise NotInFamilyError(
            f"L does not solve the Lyapunov equation for Sigma (residual {residual:.3g})"
        )
    identity = np.eye(2)
    violation = 0.0
    for j, k in upper_pairs(sigma.shape[0]):
        expectation = conditional_expectation_matrix(sigma, laplacian, j, k)
        block = conditional_covariance(sigma, j, k)
        lyap = expectation @ block + block @ expectation.T - identity * 2.0
        coefficient_jk, coefficient_kj, rhs = _balance_row(conditional_stats(sigma, j, k))
        balance = -expectation[0, 1] * coefficient_jk - expectation[1, 0] * coefficient_kj - rhs
        violation = max(violation, float(np.max(np.abs(lyap))), abs(balance))
    return violation


@dataclass(frozen=True)
class GgcemSystem:
    """W y = d with y the adjacency-signed off-diagonal conditional expectations."""

    W: np.ndarray
    d: np.ndarray
    p: int

    @property
    def positions(self):
        return off_diagonal_positions(self.p)


def build_ggcem_system(covariance):
    s = _require_positive_definite(covariance)
    p = s.shape[0]
    column_of = {position: column for column, position in enumerate(off_diagonal_positions(p))}
    pairs = upper_pairs(p)
    W = np.zeros((len(pairs), p * (p - 1)))
    d = np.zeros(len(pairs))
    for row, (j, k) in enumerate(pairs):
        coefficient_jk, coefficient_kj, rhs = _balance_row(conditional_stats(s, j, k))
        W[row, column_of[(j, k)]] = coefficient_jk
        W[row, column_of[(k, j)]] = coefficient_kj
        d[row] = rhs
    return GgcemSystem(W, d, p)


@dataclass
class GgcemEstimate:
    P_hat: np.ndarray
    rho: float
    residual: float
    converged: bool
    auxiliaries: Optional[np.ndarray] = None
    model: ModelKindEnum = ModelKindEnum.GGCEM
    support_agreement: Optional[float] = None

    @property
    def p(self):
        return self.P_hat.shape[0]

    def edges(self, orientation=OrientationEnum.SENDING, tolerance=None, names=None):
        return extract_edges(self.P_hat, ADJACENCY, orientation, tolerance, names)


def _scatter(values, p):
    adjacency = np.zeros((p, p))
    for value, (row, col) in zip(values, off_diagonal_positions(p)):
        adjacency[row, col] = value
    return adjacency


def _ggcem_estimate(system, solution):
    return GgcemEstimate(
        P_hat=_scatter(solution.x, system.p),
        rho=solution.rho,
        residual=solution.residual_l2,
        converged=solution.converged,
    )


def learn_ggcem(covariance, rho, options=None):
    system = build_ggcem_system(covariance)
    solution = solve_lasso(LassoProblem(system.W, system.d, rho), options)
    return _ggcem_estimate(system, solution)


def learn_ggcem_path(covariance, rhos, options=None):
    system = build_ggcem_system(covariance)
    solutions = rho_path(LassoProblem(system.W, system.d), rhos, options)
    return [_ggcem_estimate(system, solution) for solution in solutions]


@dataclass(frozen=True)
class ExtendedGgcemSystem:
    """
    Three equations per pair, from the (1,1), (2,2) and (1,2) entries of the
    pairwise balance equation. Columns are the p^2 - p adjacency unknowns in
    ``positions`` order followed by two diagonal auxiliaries per pair.
    """

    W_ext: np.ndarray
    d_ext: np.ndarray
    p: int
    auxiliary_pairs: Tuple[Tuple[int, int], ...]

    @property
    def positions(self):
        return off_diagonal_positions(self.p)

    @property
    def n_adjacency(self):
        return self.p * (self.p - 1)


def build_extended_system(covariance):
    s = _require_positive_definite(covariance)
    p = s.shape[0]
    column_of = {position: column for column, position in enumerate(off_diagonal_positions(p))}
    pairs = upper_pairs(p)
    n_adjacency = p * (p - 1)
    W_ext = np.zeros((3 * len(pairs), 2 * n_adjacency))
    d_ext = np.zeros(3 * len(pairs))
    for index, (j, k) in enumerate(pairs):
        stats = conditional_stats(s, j, k)
        s_j, s_k, s_jk = stats.sigma_j_given_c, stats.sigma_k_given_c, stats.sigma_jk_given_c
        y_jk, y_kj = column_of[(j, k)], column_of[(k, j)]
        x_jj, x_kk = n_adjacency + 2 * index, n_adjacency + 2 * index + 1
        top, bottom, cross = 3 * index, 3 * index + 1, 3 * index + 2
        # x_jk = -y_jk and x_kj = -y_kj
        W_ext[top, [x_jj, y_jk]] = [2.0 * s_j, -2.0 * s_jk]
        d_ext[top] = 2.0
        W_ext[bottom, [x_kk, y_kj]] = [2.0 * s_k, -2.0 * s_jk]
        d_ext[bottom] = 2.0
        W_ext[cross, [x_jj, x_kk, y_jk, y_kj]] = [s_jk, s_jk, -s_k, -s_j]
    return ExtendedGgcemSystem(W_ext, d_ext, p, tuple(pairs))


def _extended_estimate(system, solution):
    n = system.n_adjacency
    return GgcemEstimate(
        P_hat=_scatter(solution.x[:n], system.p),
        rho=solution.rho,
        residual=solution.residual_l2,
        converged=solution.converged,
        auxiliaries=solution.x[n:].reshape(-1, 2),
        model=ModelKindEnum.GGCEM_EXTENDED,
    )


def _record_support(extended, basic):
    comparison = compare_support(basic.P_hat, extended.P_hat)
    extended.support_agreement = comparison.agreement
    logger.info(
        "extended and basic GGCEM supports agree on %.3f of pairs at rho=%g",
        comparison.agreement,
        extended.rho,
    )


def learn_ggcem_extended(covariance, rho, options=None, compare_basic=True):
    """
    With ``compare_basic`` the basic system is solved at the same rho and the
    share of pairs where both supports agree is kept on the estimate.
    """
    system = build_extended_system(covariance)
    solution = solve_lasso(LassoProblem(system.W_ext, system.d_ext, rho), options)
    estimate = _extended_estimate(system, solution)
    if compare_basic:
        _record_support(estimate, learn_ggcem(covariance, rho, options))
    return estimate


def learn_ggcem_extended_path(covariance, rhos, options=None, compare_basic=True):
    system = build_extended_system(covariance)
    solutions = rho_path(LassoProblem(system.W_ext, system.d_ext), rhos, options)
    estimates = [_extended_estimate(system, solution) for solution in solutions]
    if compare_basic:
        for estimate, basic in zip(estimates, learn_ggcem_path(covariance, rhos, options)):
            _record_support(estimate, basic)
    return estimates


class GgcemLearner:
    model = ModelKindEnum.GGCEM

    def __init__(self, options=None):
        self.options = options

    def fit(self, covariance, rho):
        return learn_ggcem(covariance, rho, self.options)

    def fit_path(self, covariance, rhos):
        return learn_ggcem_path(covariance, rhos, self.options)


class ExtendedGgcemLearner(GgcemLearner):
    """Extended GGCEM; ``compare_basic`` keeps the support check against the basic fit."""

    model = ModelKindEnum.GGCEM_EXTENDED

    def __init__(self, options=None, compare_basic=True):
        super().__init__(options)
        self.compare_basic = compare_basic

    def fit(self, covariance, rho):
        return learn_ggcem_extended(covariance, rho, self.options, self.compare_basic)

    def fit_path(self, covariance, rhos):
        return learn_ggcem_extended_path(covariance, rhos, self.options, self.compare_basic)


class SupportComparison(NamedTuple):
    agreement: float
    only_first: List[Tuple[int, int]]
    only_second: List[Tuple[int, int]]


def compare_support(first, second, edge_tolerance=None):
    """Fraction of ordered pairs i != j on which two adjacency estimates agree about an edge."""
    first = as_square(first, "first")
    second = as_square(second, "second")
    if first.shape != second.shape:
        raise DimensionMismatchError(f"cannot compare {first.shape} with {second.shape}")
    if edge_tolerance is None:
        edge_tolerance = inference_settings.EDGE_TOLERANCE
    p = first.shape[0]
    only_first, only_second = [], []
    for i, j in off_diagonal_positions(p):
        in_first = abs(first[i, j]) > edge_tolerance
        in_second = abs(second[i, j]) > edge_tolerance
        if in_first and not in_second:
            only_first.append((i, j))
        elif in_second and not in_first:
            only_second.append((i, j))
    total = p * (p - 1)
    agreement = 1.0 - (len(only_first) + len(only_second)) / total if total else 1.0
    for i, j in sorted(only_first + only_second):
        logger.info("support differs at (%d, %d)", i + 1, j + 1)
    return SupportComparison(agreement, sorted(only_first), sorted(only_second))
