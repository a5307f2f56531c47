# inference/services/linalg.py

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
import scipy.linalg

from inference.conf import inference_settings
from inference.enums.enums import DefinitenessEnum
from inference.exceptions import (
    DimensionMismatchError,
    IndeterminateStabilityError,
    InvalidParameterError,
    NotDiagonallyDominantError,
    SimulationDivergenceError,
    SingularMatrixError,
    UnstableLaplacianError,
)

logger = logging.getLogger(__name__)


def as_matrix(value, name="matrix"):
    """Dense float copy of ``value`` as a 2-D array with finite entries."""
    if isinstance(value, CovarianceMatrix):
        value = value.values
    array = np.array(value, dtype=float, ndmin=2)
    if array.ndim != 2:
        raise DimensionMismatchError(f"{name} must be two-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidParameterError(f"{name} contains NaN or infinite entries")
    return array


def as_square(value, name="matrix"):
    array = as_matrix(value, name)
    if array.shape[0] != array.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {array.shape}")
    return array


def upper_pairs(p):
    """Unordered pairs (j, k), j < k, in lexicographic order."""
    return [(j, k) for j in range(p) for k in range(j + 1, p)]


def off_diagonal_positions(p):
    """Off-diagonal (row, col) positions in the order ``vectorize`` visits them."""
    return [(row, col) for col in range(p) for row in range(p) if row != col]


@dataclass(frozen=True)
class SkewSymmetric:
    """Skew-symmetric p x p matrix stored by its strict upper triangle."""

    p: int
    upper: np.ndarray

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float).ravel()
        if upper.size != self.p * (self.p - 1) // 2:
            raise DimensionMismatchError(
                f"a {self.p}x{self.p} skew-symmetric matrix has "
                f"{self.p * (self.p - 1) // 2} free entries, got {upper.size}"
            )
        object.__setattr__(self, "upper", upper)

    @classmethod
    def zeros(cls, p):
        return cls(p, np.zeros(p * (p - 1) // 2))

    @classmethod
    def from_matrix(cls, matrix):
        """Skew part (K - K^T) / 2 of an arbitrary square matrix."""
        matrix = as_square(matrix, "kappa")
        p = matrix.shape[0]
        skew = 0.5 * (matrix - matrix.T)
        rows, cols = np.triu_indices(p, k=1)
        return cls(p, skew[rows, cols])

    @property
    def matrix(self):
        out = np.zeros((self.p, self.p))
        rows, cols = np.triu_indices(self.p, k=1)
        out[rows, cols] = self.upper
        out[cols, rows] = -self.upper
        return out

    def entry(self, i, j):
        return self.matrix[i, j]


@dataclass(frozen=True)
class ConditionalStats:
    """Conditional (co)variances of variables j, k given all the others."""

    j: int
    k: int
    sigma_j_given_c: float
    sigma_k_given_c: float
    sigma_jk_given_c: float

    def __post_init__(self):
        if self.j == self.k:
            raise InvalidParameterError("conditional statistics need two distinct variables")
        if self.sigma_j_given_c <= 0 or self.sigma_k_given_c <= 0:
            raise SingularMatrixError(
                f"conditional variances of ({self.j}, {self.k}) must be positive"
            )
        product = self.sigma_j_given_c * self.sigma_k_given_c
        if self.sigma_jk_given_c ** 2 > product * (1.0 + 1e-10):
            raise SingularMatrixError(
                f"conditional covariance of ({self.j}, {self.k}) is not positive semi-definite"
            )

    @property
    def matrix(self):
        return np.array(
            [
                [self.sigma_j_given_c, self.sigma_jk_given_c],
                [self.sigma_jk_given_c, self.sigma_k_given_c],
            ]
        )


@dataclass
class CovarianceMatrix:
    """Symmetric p x p covariance (sample or exact) with its definiteness."""

    values: np.ndarray
    names: Optional[Sequence[str]] = None
    definiteness: DefinitenessEnum = field(init=False)

    def __post_init__(self):
        values = as_square(self.values, "covariance")
        if not np.allclose(values, values.T, rtol=1e-10, atol=1e-12):
            raise InvalidParameterError("covariance matrix must be symmetric")
        self.values = 0.5 * (values + values.T)
        if self.names is not None:
            self.names = tuple(self.names)
            if len(self.names) != self.p:
                raise DimensionMismatchError(
                    f"{len(self.names)} names for a {self.p}x{self.p} covariance"
                )
        self.definiteness = classify_definiteness(self.values)

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def trace(self):
        return float(np.trace(self.values))

    @property
    def is_positive_definite(self):
        return self.definiteness is DefinitenessEnum.POSITIVE_DEFINITE

    def variable_names(self):
        if self.names is not None:
            return list(self.names)
        return [str(i + 1) for i in range(self.p)]


def classify_definiteness(values):
    eigenvalues = scipy.linalg.eigvalsh(values)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    tolerance = 10 * values.shape[0] * np.finfo(float).eps * scale
    if eigenvalues[0] > tolerance:
        return DefinitenessEnum.POSITIVE_DEFINITE
    if eigenvalues[0] >= -tolerance:
        return DefinitenessEnum.POSITIVE_SEMIDEFINITE
    return DefinitenessEnum.INDEFINITE


def kronecker(a, b):
    """Kronecker product; ``kronecker(A, B) @ vectorize(X) == vectorize(B @ X @ A.T)``."""
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def vectorize(matrix):
    # column-major everywhere
    return as_matrix(matrix).reshape(-1, order="F")


def unvectorize(vector, rows, cols):
    vector = np.asarray(vector, dtype=float).ravel()
    if vector.size != rows * cols:
        raise DimensionMismatchError(
            f"cannot reshape a vector of length {vector.size} into {rows}x{cols}"
        )
    return vector.reshape((rows, cols), order="F")


def lyapunov_operator(laplacian):
    """Matrix of X -> L X + X L^T acting on column-major vec(X)."""
    laplacian = as_square(laplacian, "L")
    identity = np.eye(laplacian.shape[0])
    return np.kron(identity, laplacian) + np.kron(laplacian, identity)


def lyapunov_residual(laplacian, sigma, noise=None):
    laplacian = as_square(laplacian, "L")
    sigma = as_square(sigma, "Sigma")
    if noise is None:
        noise = 2.0 * np.eye(laplacian.shape[0])
    return float(np.max(np.abs(laplacian @ sigma + sigma @ laplacian.T - noise)))


def validate_stability(laplacian, tolerance=None):
    """True when every eigenvalue of L has real part above ``tolerance``.

    The diffusion dx = -L x dt + sigma dW is then stationary.
    """
    laplacian = as_square(laplacian, "L")
    if tolerance is None:
        tolerance = inference_settings.STABILITY_TOLERANCE
    try:
        eigenvalues = scipy.linalg.eigvals(laplacian)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IndeterminateStabilityError(f"eigenvalue iteration failed: {exc}") from exc
    return bool(np.min(eigenvalues.real) > tolerance)


def min_real_eigenvalue(laplacian):
    return float(np.min(scipy.linalg.eigvals(as_square(laplacian, "L")).real))


def solve_lyapunov(laplacian, noise=None):
    """
    Steady-state covariance of dx = -L x dt + B dW.

    Solves L Sigma + Sigma L^T = B B^T (default 2 I, i.e. sigma^2 = 2) as the
    dense p^2 x p^2 system (I kron L + L kron I) vec(Sigma) = vec(B B^T).

    Raises:
        UnstableLaplacianError: L has an eigenvalue with non-positive real part.
        SingularMatrixError: the Kronecker system is singular or too ill-conditioned
            for a reliable solve.
    """
    laplacian = as_square(laplacian, "L")
    p = laplacian.shape[0]
    if noise is None:
        noise = 2.0 * np.eye(p)
    noise = as_square(noise, "noise")
    if noise.shape != laplacian.shape:
        raise DimensionMismatchError(f"noise is {noise.shape}, L is {laplacian.shape}")
    if not validate_stability(laplacian):
        raise UnstableLaplacianError(
            f"L is not stable (min real eigenvalue {min_real_eigenvalue(laplacian):.3g})"
        )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            solution = scipy.linalg.solve(lyapunov_operator(laplacian), vectorize(noise))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularMatrixError(f"Lyapunov system is singular or ill-conditioned: {exc}") from exc
    sigma = unvectorize(solution, p, p)
    return 0.5 * (sigma + sigma.T)


def _split(p, j, k):
    if j == k:
        raise InvalidParameterError("j and k must differ")
    if not (0 <= j < p and 0 <= k < p):
        raise DimensionMismatchError(f"pair ({j}, {k}) outside a {p}-variable set")
    rest = [i for i in range(p) if i not in (j, k)]
    return [j, k], rest


def regression_block(sigma, j, k):
    """Sigma_{a,b} (Sigma_{b,b})^{-1} for a = (j, k) and b the remaining variables."""
    sigma = as_square(sigma, "Sigma")
    a, b = _split(sigma.shape[0], j, k)
    if not b:
        return np.zeros((2, 0)), a, b
    try:
        coefficients = scipy.linalg.solve(
            sigma[np.ix_(b, b)], sigma[np.ix_(b, a)], assume_a="pos"
        ).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"conditioning block for pair ({j}, {k}) is singular: {exc}"
        ) from exc
    return coefficients, a, b


def conditional_covariance(sigma, j, k):
    """2x2 Schur complement Sigma_{a,a} - Sigma_{a,b} Sigma_{b,b}^{-1} Sigma_{a,b}^T."""
    sigma = as_square(sigma, "Sigma")
    coefficients, a, b = regression_block(sigma, j, k)
    block = sigma[np.ix_(a, a)]
    if b:
        block = block - coefficients @ sigma[np.ix_(b, a)]
    return 0.5 * (block + block.T)


def conditional_stats(sigma, j, k):
    # with p = 2 nothing is conditioned on and the unconditional moments come back
    block = conditional_covariance(sigma, j, k)
    return ConditionalStats(
        j=j,
        k=k,
        sigma_j_given_c=float(block[0, 0]),
        sigma_k_given_c=float(block[1, 1]),
        sigma_jk_given_c=float(block[0, 1]),
    )


def build_q_basis(p):
    """Helmert rows: an orthonormal basis of the complement of the all-ones vector."""
    if p < 2:
        raise InvalidParameterError("the Q basis needs p >= 2")
    return scipy.linalg.helmert(p, full=False)


def centering_projector(p):
    return np.eye(p) - np.ones((p, p)) / p


def norm_l1_elementwise(matrix):
    return float(np.sum(np.abs(as_matrix(matrix))))


def norm_linf_elementwise(matrix):
    return float(np.max(np.abs(as_matrix(matrix))))


def diag_dominance_alpha(matrix):
    """min_i |A_ii| - sum_{j != i} |A_ij|; raises when A is not strictly diagonally dominant."""
    matrix = as_square(matrix, "A")
    magnitudes = np.abs(matrix)
    diagonal = np.diag(magnitudes)
    margins = diagonal - (magnitudes.sum(axis=1) - diagonal)
    alpha = float(np.min(margins))
    if alpha <= 0:
        row = int(np.argmin(margins))
        raise NotDiagonallyDominantError(
            f"not strictly diagonally dominant (row {row + 1} margin {alpha:.3g})", alpha
        )
    return alpha


def _integrate(laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains, rng):
    p = laplacian.shape[0]
    drift = np.eye(p) - dt * laplacian.T
    scale = sigma * math.sqrt(dt)
    limit = inference_settings.DIVERGENCE_NORM
    state = np.zeros((n_chains, p))

    def check(step):
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > limit:
            raise SimulationDivergenceError(
                f"state diverged at step {step}; dt = {dt:g} is too large for this L"
            )

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, burn_in_steps + sample_steps + 1):
            state = state @ drift + scale * rng.standard_normal((n_chains, p))
            if step % 100 == 0:
                check(step)
            if step > burn_in_steps and (step - burn_in_steps) % sample_stride == 0:
                check(step)
                yield state


def _simulation_plan(laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains):
    laplacian = as_square(laplacian, "L")
    if sigma is None:
        sigma = inference_settings.SIMULATION_SIGMA
    if dt is None:
        dt = inference_settings.SIMULATION_DT
    if n_chains is None:
        n_chains = inference_settings.SIMULATION_CHAINS
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    if sigma < 0:
        raise InvalidParameterError("sigma must be non-negative")
    if sample_stride < 1 or sample_steps < sample_stride or n_chains < 1:
        raise InvalidParameterError(
            "need n_chains >= 1 and sample_steps >= sample_stride >= 1"
        )
    if not validate_stability(laplacian):
        raise UnstableLaplacianError("cannot simulate an unstable L")
    if burn_in_steps is None:
        burn_in_time = inference_settings.SIMULATION_BURN_IN_TIME / min_real_eigenvalue(laplacian)
        burn_in_steps = int(math.ceil(burn_in_time / dt))
    return laplacian, float(sigma), float(dt), int(burn_in_steps), int(n_chains)


def sample_diffusion(
    laplacian,
    sigma=None,
    dt=None,
    burn_in_steps=None,
    sample_steps=1,
    sample_stride=1,
    seed=None,
    n_chains=None,
):
    """
    Euler-Maruyama draws of dx = -L x dt + sigma dW started from x0 = 0.

    ``n_chains`` independent chains run side by side; after ``burn_in_steps``
    every ``sample_stride``-th state of the next ``sample_steps`` steps is kept.
    Returns an array of shape (n_chains * sample_steps // sample_stride, p).
    """
    laplacian, sigma, dt, burn_in_steps, n_chains = _simulation_plan(
        laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains
    )
    rng = np.random.default_rng(seed)
    blocks = list(
        _integrate(laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains, rng)
    )
    return np.vstack(blocks)


def simulate_diffusion(
    laplacian,
    sigma=None,
    dt=None,
    burn_in_steps=None,
    sample_steps=1000,
    sample_stride=10,
    seed=None,
    n_chains=None,
):
    """Empirical covariance (1/n normalisation) of the post-burn-in diffusion states."""
    laplacian, sigma, dt, burn_in_steps, n_chains = _simulation_plan(
        laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains
    )
    rng = np.random.default_rng(seed)
    p = laplacian.shape[0]
    total = np.zeros(p)
    outer = np.zeros((p, p))
    count = 0
    states: Iterator[np.ndarray] = _integrate(
        laplacian, sigma, dt, burn_in_steps, sample_steps, sample_stride, n_chains, rng
    )
    for block in states:
        total += block.sum(axis=0)
        outer += block.T @ block
        count += block.shape[0]
    mean = total / count
    covariance = outer / count - np.outer(mean, mean)
    logger.debug(
        "simulated %d samples (burn-in %d steps, dt=%g, %d chains)",
        count, burn_in_steps, dt, n_chains,
    )
    return CovarianceMatrix(0.5 * (covariance + covariance.T))
