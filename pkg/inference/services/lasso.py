# inference/services/lasso.py

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from inference.conf import inference_settings
from inference.exceptions import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0)


@dataclass(frozen=True)
class LassoProblem:
    """min_x ||response - design x||_2^2 + rho ||x||_1 (no 1/(2m) factor)."""

    design: np.ndarray
    response: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        design = np.array(self.design, dtype=float, ndmin=2)
        response = np.asarray(self.response, dtype=float).ravel()
        if design.ndim != 2 or design.shape[0] != response.size:
            raise DimensionMismatchError(
                f"design has {design.shape[0]} rows but response has {response.size} entries"
            )
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
            raise InvalidParameterError("LASSO data contains NaN or infinite entries")
        if not np.isfinite(self.rho) or self.rho < 0:
            raise InvalidParameterError(f"rho must be a finite value >= 0, got {self.rho}")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n_features(self):
        return self.design.shape[1]

    def with_rho(self, rho):
        return replace(self, rho=rho)

    def residual(self, x):
        return self.response - self.design @ x

    def objective(self, x):
        r = self.residual(x)
        return float(r @ r + self.rho * np.sum(np.abs(x)))


@dataclass(frozen=True)
class LassoOptions:
    tolerance: float = field(default_factory=lambda: inference_settings.LASSO_TOLERANCE)
    max_sweeps: int = field(default_factory=lambda: inference_settings.LASSO_MAX_SWEEPS)
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tolerance <= 0:
            raise InvalidParameterError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise InvalidParameterError("max_sweeps must be at least 1")


@dataclass(frozen=True)
class LassoSolution:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual_l2: float
    rho: float
    objective_history: Tuple[float, ...] = ()
    zero_columns: Tuple[int, ...] = ()


def kkt_violation(problem, x):
    """Largest violation of the LASSO optimality conditions at ``x``."""
    gradient = -2.0 * problem.design.T @ problem.residual(x)
    nonzero = x != 0
    violation = np.zeros_like(x)
    violation[nonzero] = np.abs(gradient[nonzero] + problem.rho * np.sign(x[nonzero]))
    violation[~nonzero] = np.maximum(np.abs(gradient[~nonzero]) - problem.rho, 0.0)
    return float(violation.max()) if violation.size else 0.0


def solve_lasso(problem, options=None):
    """
    Cyclic coordinate descent with exact soft-threshold updates.

    Full sweeps alternate with sweeps over the current non-zero coordinates;
    the solve stops when a full sweep moves no coordinate by more than
    ``options.tolerance``. Columns of the design that are entirely zero keep
    a zero coefficient and are listed in ``zero_columns``.
    """
    options = options or LassoOptions()
    design, response = problem.design, problem.response
    d = problem.n_features
    half_rho = 0.5 * problem.rho

    gram = design.T @ design
    col_norms = np.diag(gram).copy()
    zero_columns = tuple(int(j) for j in np.flatnonzero(col_norms == 0.0))
    if zero_columns:
        logger.debug("coefficients %s have all-zero design columns and stay at 0", zero_columns)
    usable = np.flatnonzero(col_norms > 0.0)

    if options.initial is None:
        x = np.zeros(d)
    else:
        x = np.array(options.initial, dtype=float).ravel()
        if x.size != d:
            raise DimensionMismatchError(f"initial point has {x.size} entries, expected {d}")
        x[list(zero_columns)] = 0.0

    history = [problem.objective(x)]
    converged = False
    full_sweep = True
    sweeps = 0
    while sweeps < options.max_sweeps:
        # refreshed each full sweep so rounding in the running update does not accumulate
        if full_sweep:
            gradient = design.T @ (response - design @ x)
            coordinates = usable
        else:
            coordinates = usable[x[usable] != 0.0]

        max_change = 0.0
        for j in coordinates:
            current = x[j]
            z = gradient[j] + col_norms[j] * current
            updated = soft_threshold(z, half_rho) / col_norms[j]
            change = updated - current
            if change != 0.0:
                gradient -= gram[:, j] * change
                x[j] = updated
                max_change = max(max_change, abs(change))
        sweeps += 1
        history.append(problem.objective(x))

        if full_sweep:
            if max_change < options.tolerance:
                converged = True
                break
            full_sweep = not np.any(x[usable] != 0.0)
        elif max_change < options.tolerance:
            full_sweep = True

    residual = problem.residual(x)
    if not converged:
        logger.warning(
            "LASSO did not converge in %d sweeps (rho=%g, %d unknowns)",
            options.max_sweeps, problem.rho, d,
        )
    return LassoSolution(
        x=x,
        objective=history[-1],
        iterations=sweeps,
        converged=converged,
        residual_l2=float(np.linalg.norm(residual)),
        rho=problem.rho,
        objective_history=tuple(history),
        zero_columns=zero_columns,
    )


def rho_path(problem, rhos: Sequence[float], options=None):
    """Solve for each rho in strictly descending order, warm-starting from the previous x."""
    rhos = [float(rho) for rho in rhos]
    if not rhos:
        raise InvalidParameterError("the rho path is empty")
    if any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise InvalidParameterError("rho values must be strictly descending")
    options = options or LassoOptions()
    solutions = []
    initial = options.initial
    for rho in rhos:
        solution = solve_lasso(problem.with_rho(rho), replace(options, initial=initial))
        solutions.append(solution)
        initial = solution.x
    return solutions
