# inference/services/observations.py

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from inference.enums.enums import CenterModeEnum
from inference.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    ObservationFormatError,
)
from inference.services.linalg import CovarianceMatrix

logger = logging.getLogger(__name__)

TIME_COLUMN = "time"
CONDITION_COLUMN = "condition"


@dataclass(frozen=True)
class ObservationSet:
    """
    Rows of observations. ``reference`` is the centering mode already applied
    to ``values``; None when the data are raw.
    """

    names: Tuple[str, ...]
    values: np.ndarray
    times: Optional[np.ndarray] = None
    conditions: Optional[np.ndarray] = None
    reference: Optional[CenterModeEnum] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, ndmin=2)
        names = tuple(str(name) for name in self.names)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise DimensionMismatchError(
                f"{len(names)} variable names for data of shape {values.shape}"
            )
        if values.shape[0] < 2:
            raise ObservationFormatError(
                f"at least two observations are needed, got {values.shape[0]}"
            )
        if len(set(names)) != len(names):
            raise ObservationFormatError("variable names must be unique")
        if not np.all(np.isfinite(values)):
            raise ObservationFormatError("observations contain NaN or infinite entries")
        for label, column in (("time stamps", self.times), ("condition labels", self.conditions)):
            if column is not None and len(column) != values.shape[0]:
                raise DimensionMismatchError(f"{len(column)} {label} for {values.shape[0]} rows")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        if self.times is not None:
            object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.conditions is not None:
            object.__setattr__(self, "conditions", np.asarray(self.conditions, dtype=str))
        if self.reference is not None:
            object.__setattr__(self, "reference", CenterModeEnum(self.reference))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def to_frame(self):
        frame = pd.DataFrame(self.values, columns=list(self.names))
        if self.times is not None:
            frame.insert(0, TIME_COLUMN, self.times)
        if self.conditions is not None:
            frame.insert(0, CONDITION_COLUMN, self.conditions)
        return frame

    def subset(self, mask):
        return ObservationSet(
            names=self.names,
            values=self.values[mask],
            times=None if self.times is None else self.times[mask],
            conditions=None if self.conditions is None else self.conditions[mask],
            reference=self.reference,
        )


def load_csv(path):
    """
    Read an observation CSV: a header row of names, then one row per observation.

    Columns named ``time`` and ``condition`` (any case) hold time stamps and
    condition labels; every other column is a variable.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise ObservationFormatError(f"{path}: file is empty") from exc
    except pd.errors.ParserError as exc:
        raise ObservationFormatError(f"{path}: ragged rows ({exc})") from exc
    except UnicodeDecodeError as exc:
        raise ObservationFormatError(f"{path}: not UTF-8 ({exc})") from exc

    header = [cell.strip() for cell in raw.iloc[0].tolist()]
    body = raw.iloc[1:].reset_index(drop=True)
    if body.empty:
        raise ObservationFormatError(f"{path}: no observations")
    if body.isna().any().any():
        line = int(body.isna().any(axis=1).to_numpy().argmax()) + 2
        raise ObservationFormatError(f"{path}: ragged row at line {line}")
    if len(set(header)) != len(header):
        duplicates = sorted({name for name in header if header.count(name) > 1})
        raise ObservationFormatError(f"{path}: duplicate column names {duplicates}")
    body.columns = header

    lowered = {name.lower(): name for name in header}
    conditions = None
    if CONDITION_COLUMN in lowered:
        conditions = body.pop(lowered[CONDITION_COLUMN]).str.strip().to_numpy()
    times = None
    if TIME_COLUMN in lowered:
        times = _numeric(body[[lowered[TIME_COLUMN]]], path).ravel()
        body = body.drop(columns=lowered[TIME_COLUMN])
    if body.shape[1] == 0:
        raise ObservationFormatError(f"{path}: no variable columns")

    observations = ObservationSet(
        names=tuple(body.columns),
        values=_numeric(body, path),
        times=times,
        conditions=conditions,
    )
    logger.info("loaded %s: n=%d, p=%d", path, observations.n, observations.p)
    return observations


def _numeric(frame, path):
    converted = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    bad = converted.isna()
    if bad.any().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise ObservationFormatError(
            f"{path}: non-numeric cell {frame.iat[row, col]!r} "
            f"at line {row + 2}, column {frame.columns[col]!r}"
        )
    return converted.to_numpy(dtype=float)


def _reference(observations, mode):
    if mode is CenterModeEnum.MEAN:
        return observations.values.mean(axis=0)
    if mode is CenterModeEnum.TIME0:
        if observations.times is None:
            raise InvalidParameterError("time0 centering needs a time column")
        first = observations.times == observations.times.min()
        return observations.values[first].mean(axis=0)
    return np.zeros(observations.p)


def center(observations, mode=CenterModeEnum.MEAN, by_condition=False):
    """Subtract the column means (``mean``) or the mean of the earliest time point (``time0``)."""
    mode = CenterModeEnum(mode)
    if mode is CenterModeEnum.NONE:
        return observations
    if not by_condition or observations.conditions is None:
        return replace(
            observations,
            values=observations.values - _reference(observations, mode),
            reference=mode,
        )
    values = observations.values.copy()
    for label in _labels(observations):
        mask = observations.conditions == label
        values[mask] -= _reference(observations.subset(mask), mode)
    return replace(observations, values=values, reference=mode)


def sample_covariance(observations):
    """
    Maximum-likelihood covariance (1/n normalisation).

    Time-0 centred data keep their offset from the sample mean: the second
    moment is taken about the time-0 reference, X^T X / n.
    """
    if observations.reference is CenterModeEnum.TIME0:
        values = observations.values.T @ observations.values / observations.n
    else:
        values = np.atleast_2d(np.cov(observations.values, rowvar=False, bias=True))
    return CovarianceMatrix(values, observations.names)


def _labels(observations):
    # first-appearance order
    return list(dict.fromkeys(observations.conditions.tolist()))


def split_by_condition(observations):
    """(label, ObservationSet) per condition, or a single ("all", observations) pair."""
    if observations.conditions is None:
        return [("all", observations)]
    return [
        (label, observations.subset(observations.conditions == label))
        for label in _labels(observations)
    ]
