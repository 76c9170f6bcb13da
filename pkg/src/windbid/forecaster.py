"""Feature assembly and the forecast-improvement fit.

A model is a linear rule over named dataset columns plus optional calendar
dummies and a constant offset.  Non-categorical columns are dynamically
scaled by their maximum over the *training* rows only; the factors are frozen
into the fitted rule so query rows are mapped identically.  Fitting with unit
weights minimizes the mean absolute deviation of the rule on the training
window, i.e. it learns the conditional median of production.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import FitError
from .lp import SimplexSolver, WeightedL1Problem, solve_weighted_l1
from .timeseries import MarketDataset

logger = logging.getLogger(__name__)

CONSTANT_COLUMN = "const"
HOUR_COLUMNS = tuple(f"h{h:02d}" for h in range(24))
WEEKDAY_COLUMNS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


@dataclass(frozen=True)
class ModelSpec:
    """Which columns a rule may use: named features plus dummy groups."""

    features: tuple[str, ...] = ()
    include_constant: bool = True
    include_hour_dummies: bool = False
    include_weekday_dummies: bool = False

    def __post_init__(self):
        features = tuple(self.features)
        if len(set(features)) != len(features):
            raise FitError(f"duplicate feature names in spec: {features}")
        if not (
            features
            or self.include_constant
            or self.include_hour_dummies
            or self.include_weekday_dummies
        ):
            raise FitError("model spec selects no columns at all")
        object.__setattr__(self, "features", features)

    def column_names(self) -> tuple[str, ...]:
        names: list[str] = []
        if self.include_constant:
            names.append(CONSTANT_COLUMN)
        names.extend(self.features)
        if self.include_hour_dummies:
            names.extend(HOUR_COLUMNS)
        if self.include_weekday_dummies:
            names.extend(WEEKDAY_COLUMNS)
        return tuple(names)


@dataclass(frozen=True)
class FeatureMatrix:
    """Scaled design matrix for a set of rows, with the factors that made it."""

    timestamps: tuple[datetime, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    scale_factors: np.ndarray
    categorical: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DecisionRule:
    """Fitted linear rule: coefficients over scaled columns, in target units
    of ``capacity`` (predictions are the scaled output times ``capacity``)."""

    columns: tuple[str, ...]
    coefficients: np.ndarray
    scale_factors: np.ndarray
    capacity: float
    window_id: str = ""
    objective: float = float("nan")

    def to_record(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": [float(v) for v in self.coefficients],
            "scale_factors": [float(v) for v in self.scale_factors],
            "capacity": float(self.capacity),
            "window_id": self.window_id,
            "objective": float(self.objective),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, record: dict) -> "DecisionRule":
        return cls(
            columns=tuple(record["columns"]),
            coefficients=np.array(record["coefficients"], dtype=np.float64),
            scale_factors=np.array(record["scale_factors"], dtype=np.float64),
            capacity=float(record["capacity"]),
            window_id=record.get("window_id", ""),
            objective=float(record.get("objective", "nan")),
        )

    @classmethod
    def from_json(cls, text: str) -> "DecisionRule":
        return cls.from_record(json.loads(text))


def _dummy_rows(dataset: MarketDataset, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hour-of-day and weekday (0=Monday) for the given row indices, UTC."""
    start = dataset.start
    hours_since_start = rows + start.hour
    hour = hours_since_start % 24
    weekday = (start.weekday() + hours_since_start // 24) % 7
    return hour, weekday


def assemble_features(
    dataset: MarketDataset,
    spec: ModelSpec,
    training_rows: Sequence[int],
    query_rows: Sequence[int],
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Build scaled train and query matrices for a model spec.

    Scale factors come from the training rows alone and are applied verbatim
    to the query rows, so a query value may legitimately scale above 1.
    """
    training_rows = np.asarray(training_rows, dtype=np.int64)
    query_rows = np.asarray(query_rows, dtype=np.int64)
    n = dataset.n_hours
    for rows, what in ((training_rows, "training"), (query_rows, "query")):
        if len(rows) == 0:
            raise FitError(f"empty {what} row set")
        if rows.min() < 0 or rows.max() >= n:
            raise FitError(f"{what} rows outside dataset range [0, {n})")

    names = spec.column_names()
    p = len(names)
    categorical = np.zeros(p, dtype=bool)
    raw = {}
    for rows_key, rows in (("train", training_rows), ("query", query_rows)):
        mat = np.empty((len(rows), p))
        hour, weekday = _dummy_rows(dataset, rows)
        for j, name in enumerate(names):
            if name == CONSTANT_COLUMN and spec.include_constant:
                mat[:, j] = 1.0
                categorical[j] = True
            elif name in HOUR_COLUMNS and spec.include_hour_dummies:
                mat[:, j] = (hour == HOUR_COLUMNS.index(name)).astype(float)
                categorical[j] = True
            elif name in WEEKDAY_COLUMNS and spec.include_weekday_dummies:
                mat[:, j] = (weekday == WEEKDAY_COLUMNS.index(name)).astype(float)
                categorical[j] = True
            else:
                mat[:, j] = dataset.column(name)[rows]
        raw[rows_key] = mat

    factors = np.ones(p)
    for j in range(p):
        if categorical[j]:
            continue
        peak = raw["train"][:, j].max()
        if peak > 0.0:
            factors[j] = peak
        else:
            logger.warning(
                "feature %r has training maximum %g; scale factor 1, "
                "coefficient will be fixed to 0 if the column is all zero",
                names[j], peak,
            )

    def build(rows: np.ndarray, mat: np.ndarray) -> FeatureMatrix:
        return FeatureMatrix(
            timestamps=tuple(dataset.timestamp(int(i)) for i in rows),
            columns=names,
            values=mat / factors,
            scale_factors=factors,
            categorical=categorical,
        )

    return build(training_rows, raw["train"]), build(query_rows, raw["query"])


def fit_forecast(
    train: FeatureMatrix,
    targets_mwh: np.ndarray,
    capacity: float,
    window_id: str = "",
    solver: SimplexSolver | None = None,
) -> DecisionRule:
    """Fit the unit-weight (median-learning) rule on a training matrix.

    Targets are scaled by ``capacity`` so the LP runs on [0, 1] data; the
    in-sample objective is then the mean absolute deviation in scaled units.
    """
    targets_mwh = np.asarray(targets_mwh, dtype=np.float64)
    if targets_mwh.shape != (train.n_rows,):
        raise FitError(
            f"targets have length {len(targets_mwh)}, expected {train.n_rows}"
        )
    if not (np.isfinite(capacity) and capacity > 0):
        raise FitError(f"capacity must be positive, got {capacity}")
    ones = np.ones(train.n_rows)
    problem = WeightedL1Problem(
        x=train.values,
        targets=targets_mwh / capacity,
        psi_minus=ones,
        psi_plus=ones,
        e_bar=1.0,
    )
    q, objective = solve_weighted_l1(problem, solver=solver)
    return DecisionRule(
        columns=train.columns,
        coefficients=q,
        scale_factors=train.scale_factors,
        capacity=capacity,
        window_id=window_id,
        objective=objective,
    )


def predict(rule: DecisionRule, matrix: FeatureMatrix) -> np.ndarray:
    """Apply a fitted rule to a scaled feature matrix; returns MWh.

    Outputs are clipped to the physical range [0, capacity]; the fit bounds
    only the training rows, so an extrapolating query row may need the clip.
    """
    if matrix.columns != rule.columns:
        raise FitError(
            f"column mismatch: rule has {rule.columns}, matrix has {matrix.columns}"
        )
    scaled = np.clip(matrix.values @ rule.coefficients, 0.0, 1.0)
    return scaled * rule.capacity


def empirical_quantile(samples: Sequence[float], tau: float) -> float:
    """Smallest sample value whose empirical CDF reaches ``tau``."""
    if not 0.0 < tau < 1.0:
        raise FitError(f"fractile must be in (0, 1), got {tau}")
    ordered = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(ordered)
    if n == 0:
        raise FitError("empirical quantile of an empty sample")
    # index of inf{y : F(y) >= tau}; the epsilon guards the exact-multiple case
    k = int(np.ceil(tau * n - 1e-9)) - 1
    return float(ordered[min(max(k, 0), n - 1)])
