# inference/services/evaluation.py

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import auc, roc_curve

from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import (
    DimensionMismatchError,
    GoldStandardError,
    UndefinedAucError,
)
from inference.services.export import orient
from inference.services.linalg import CovarianceMatrix, off_diagonal_positions

logger = logging.getLogger(__name__)


@dataclass
class EdgeScoreMatrix:
    """Non-negative directed edge confidences with a zero diagonal."""

    scores: np.ndarray
    orientation: OrientationEnum = OrientationEnum.SENDING
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float, ndmin=2)
        if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
            raise DimensionMismatchError(f"edge scores must be square, got {scores.shape}")
        if np.any(scores < 0) or np.any(np.diag(scores) != 0):
            raise DimensionMismatchError("edge scores must be non-negative with a zero diagonal")
        self.scores = scores
        self.orientation = OrientationEnum(self.orientation)
        if self.names is not None:
            self.names = tuple(self.names)

    @property
    def p(self):
        return self.scores.shape[0]

    def variable_names(self):
        return list(self.names) if self.names is not None else [str(i + 1) for i in range(self.p)]

    def oriented(self, orientation):
        """Scores with entry [i, j] read in ``orientation``."""
        if OrientationEnum(orientation) is self.orientation:
            return self.scores
        return self.scores.T


class ConditionFit(NamedTuple):
    """Estimates for one condition; ``ggcem`` is None when that model was refused."""

    label: str
    ggim: object
    ggcem: Optional[object]
    covariance: CovarianceMatrix


def hybrid_edge_scores(fits: Sequence[ConditionFit], orientation=OrientationEnum.SENDING):
    """
    Sum over conditions of (|L_hat| + |P_hat|) / trace(S), off the diagonal.

    Each estimate is put in the requested orientation before summing.
    """
    orientation = OrientationEnum(orientation)
    if not fits:
        raise DimensionMismatchError("no condition fits to aggregate")
    p = fits[0].covariance.p
    names = fits[0].covariance.names
    total = np.zeros((p, p))
    for fit in fits:
        if fit.covariance.p != p or fit.ggim.L_hat.shape != (p, p):
            raise DimensionMismatchError(f"condition {fit.label!r} does not have {p} variables")
        if fit.covariance.names != names:
            raise DimensionMismatchError(f"condition {fit.label!r} has a different variable order")
        trace = fit.covariance.trace
        contribution = np.abs(orient(fit.ggim.L_hat, orientation))
        if fit.ggcem is not None:
            if fit.ggcem.P_hat.shape != (p, p):
                raise DimensionMismatchError(f"condition {fit.label!r} GGCEM has the wrong size")
            contribution = contribution + np.abs(orient(fit.ggcem.P_hat, orientation))
        total += contribution / trace
    np.fill_diagonal(total, 0.0)
    return EdgeScoreMatrix(total, orientation, names)


@dataclass
class RocResult:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    n_positive: int
    n_negative: int
    points: List[Tuple[float, float]] = field(init=False)

    def __post_init__(self):
        self.points = list(zip(self.fpr.tolist(), self.tpr.tolist()))

    @property
    def threshold_count(self):
        # first threshold is the +inf sentinel
        return len(self.thresholds) - 1

    def to_frame(self):
        return pd.DataFrame({"fpr": self.fpr, "tpr": self.tpr, "threshold": self.thresholds})


def roc_auc(scores: EdgeScoreMatrix, gold: FrozenSet[Tuple[int, int]]):
    """
    ROC of the edge scores over all ordered pairs i != j against ``gold``.

    Gold edges are (source, target) pairs, so the scores are read in sending
    orientation whatever orientation they are displayed in. Equal scores form
    a single threshold step, so the trapezoidal area is the probability that a
    gold edge outscores an absent one, ties counting 1/2.
    """
    candidates = off_diagonal_positions(scores.p)
    unknown = [edge for edge in gold if edge not in set(candidates)]
    if unknown:
        raise GoldStandardError(f"gold edges outside the candidate set: {sorted(unknown)}")
    sending = scores.oriented(OrientationEnum.SENDING)
    labels = np.array([edge in gold for edge in candidates], dtype=int)
    values = np.array([sending[i, j] for i, j in candidates])
    n_positive = int(labels.sum())
    n_negative = labels.size - n_positive
    if n_positive == 0 or n_negative == 0:
        raise UndefinedAucError(
            f"AUC is undefined with {n_positive} gold and {n_negative} absent edges"
        )
    fpr, tpr, thresholds = roc_curve(labels, values, drop_intermediate=False)
    area = float(auc(fpr, tpr))
    logger.info("AUC %.4f over %d gold and %d absent edges", area, n_positive, n_negative)
    return RocResult(fpr, tpr, thresholds, area, n_positive, n_negative)


def load_gold(path, names: Sequence[str]):
    """Gold-standard edges from a CSV with ``from,to`` columns of variable names."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise GoldStandardError(f"{path}: {exc}") from exc
    frame.columns = [column.strip().lower() for column in frame.columns]
    if not {"from", "to"} <= set(frame.columns):
        raise GoldStandardError(f"{path}: expected columns 'from,to', got {list(frame.columns)}")
    index = {name: position for position, name in enumerate(names)}
    edges = set()
    for source, target in zip(frame["from"].str.strip(), frame["to"].str.strip()):
        if source not in index or target not in index:
            raise GoldStandardError(f"{path}: unknown variable in edge {source} -> {target}")
        if source == target:
            raise GoldStandardError(f"{path}: self-loop on {source}")
        edges.add((index[source], index[target]))
    return frozenset(edges)
