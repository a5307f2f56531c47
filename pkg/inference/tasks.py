import logging
import math
from typing import List, NamedTuple, Optional

import numpy as np
from joblib import Parallel, delayed

from inference.conf import inference_settings
from inference.enums.enums import CenterModeEnum, ModelKindEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import InvalidParameterError
from inference.services.evaluation import ConditionFit, hybrid_edge_scores
from inference.services.ggcem import ExtendedGgcemLearner, GgcemLearner
from inference.services.ggim import BoundedGgimLearner, GgimLearner
from inference.services.observations import center, sample_covariance, split_by_condition
from inference.services.semidef import SemidefLearner

logger = logging.getLogger(__name__)


def parse_rho_path(text):
    """
    ``a:b:n`` gives n linearly spaced values, ``a:b:nlog`` n log-spaced ones;
    the result is strictly descending.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidParameterError(f"rho path {text!r} is not of the form a:b:n or a:b:nlog")
    count_text = parts[2].strip()
    logarithmic = count_text.endswith("log")
    if logarithmic:
        count_text = count_text[: -len("log")]
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(count_text)
    except ValueError as exc:
        raise InvalidParameterError(f"rho path {text!r}: {exc}") from exc
    if count < 1 or start < 0 or stop < 0:
        raise InvalidParameterError(f"rho path {text!r} needs n >= 1 and non-negative ends")
    if logarithmic:
        if start <= 0 or stop <= 0:
            raise InvalidParameterError("a log-spaced rho path needs positive ends")
        values = np.geomspace(start, stop, count)
    else:
        values = np.linspace(start, stop, count)
    return sorted(set(values.tolist()), reverse=True)


LEARNERS = {
    learner.model: learner
    for learner in (
        GgimLearner, BoundedGgimLearner, GgcemLearner, ExtendedGgcemLearner, SemidefLearner,
    )
}


def learner_for(kind, options=None, delta=None):
    kind = ModelKindEnum(kind)
    if kind is ModelKindEnum.GGIM_BOUNDED:
        return BoundedGgimLearner(options, delta)
    return LEARNERS[kind](options)


def fit_model(kind, covariance, rho, options=None, delta=None):
    return learner_for(kind, options, delta).fit(covariance, rho)


def fit_model_path(kind, covariance, rhos, options=None, delta=None):
    return learner_for(kind, options, delta).fit_path(covariance, rhos)


def edge_count(estimate, tolerance=None):
    return len(estimate.edges(tolerance=tolerance))


class EdgeCountSearch(NamedTuple):
    rho: float
    estimate: object
    edge_count: int
    exact: bool


def rho_for_edge_count(
    kind,
    covariance,
    target,
    options=None,
    delta=None,
    tolerance=None,
    rho_low=1e-10,
    rho_high=1.0,
    max_steps=60,
):
    """
    Bisect log(rho) until the estimate has ``target`` directed edges.

    The upper end is doubled until the graph has at most ``target`` edges.
    When no rho gives the exact count, the closest count seen is returned
    with ``exact=False``.
    """
    if target < 0:
        raise InvalidParameterError("the target edge count must be non-negative")
    if not 0 < rho_low < rho_high:
        raise InvalidParameterError("need 0 < rho_low < rho_high")

    seen = {}

    def evaluate(rho):
        estimate = fit_model(kind, covariance, rho, options, delta)
        count = edge_count(estimate, tolerance)
        seen[rho] = (estimate, count)
        logger.debug("rho=%g gives %d edges", rho, count)
        return count

    for _ in range(max_steps):
        if evaluate(rho_high) <= target:
            break
        rho_high *= 2.0
    if evaluate(rho_low) >= target:
        low, high = math.log(rho_low), math.log(rho_high)
        for _ in range(max_steps):
            middle = 0.5 * (low + high)
            count = evaluate(math.exp(middle))
            if count == target:
                break
            if count > target:
                low = middle
            else:
                high = middle

    rho, (estimate, count) = min(
        seen.items(), key=lambda item: (abs(item[1][1] - target), -item[0])
    )
    if count != target:
        logger.warning("no rho gives exactly %d edges; closest is %d at rho=%g", target, count, rho)
    return EdgeCountSearch(rho, estimate, count, count == target)


def fit_condition(observations, rho, options=None, label="all"):
    """
    GGIM and GGCEM fits for one condition.

    A singular sample covariance is routed to the semi-definite GGIM learner
    and the GGCEM half is skipped.
    """
    covariance = sample_covariance(observations)
    if covariance.is_positive_definite:
        ggim = GgimLearner(options).fit(covariance, rho)
        ggcem = GgcemLearner(options).fit(covariance, rho)
    else:
        logger.warning(
            "condition %r: S is %s; using the semi-definite learner and skipping GGCEM",
            label, covariance.definiteness.value,
        )
        ggim = SemidefLearner(options).fit(covariance, rho)
        ggcem = None
    logger.info("condition %r fitted (n=%d, rho=%g)", label, observations.n, rho)
    return ConditionFit(label, ggim, ggcem, covariance)


def fit_conditions(groups, rho, options=None, n_jobs=None) -> List[ConditionFit]:
    """Independent per-condition fits; results keep the order of ``groups``."""
    if n_jobs is None:
        n_jobs = inference_settings.N_JOBS
    return Parallel(n_jobs=n_jobs)(
        delayed(fit_condition)(observations, rho, options, label) for label, observations in groups
    )


class HybridRun(NamedTuple):
    scores: object
    fits: List[ConditionFit]


def run_hybrid(
    observations,
    rho,
    center_mode=CenterModeEnum.MEAN,
    orientation=OrientationEnum.SENDING,
    options=None,
    n_jobs=None,
    condition: Optional[str] = None,
):
    """Center each condition, fit both models per condition and sum the hybrid edge scores."""
    centered = center(observations, center_mode, by_condition=True)
    groups = split_by_condition(centered)
    if condition is not None:
        groups = [(label, group) for label, group in groups if label == condition]
        if not groups:
            raise InvalidParameterError(f"no rows with condition {condition!r}")
    fits = fit_conditions(groups, rho, options, n_jobs)
    return HybridRun(hybrid_edge_scores(fits, orientation), fits)
