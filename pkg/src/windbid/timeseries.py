"""Hourly time-series primitives: gap filling, sub-hourly aggregation, alignment.

All series are UTC-stamped with an implicit regular index: position ``i``
corresponds to ``start + i * step``.  Missing observations are stored as NaN.
Values are frozen after construction, so series can be shared freely across
threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import ClassVar, Mapping, Sequence

import numpy as np

from .errors import SeriesError

HOUR = timedelta(hours=1)
QUARTER_HOUR = timedelta(minutes=15)


def _check_utc(stamp: datetime) -> datetime:
    if stamp.tzinfo is None or stamp.utcoffset() != timedelta(0):
        raise SeriesError(f"timestamp {stamp!r} must be timezone-aware UTC")
    return stamp.astimezone(timezone.utc)


@dataclass(frozen=True)
class HourlySeries:
    """A named, UTC-stamped hourly sequence; NaN marks a missing hour."""

    name: str
    start: datetime
    values: np.ndarray

    STEP: ClassVar[timedelta] = HOUR

    def __post_init__(self):
        start = _check_utc(self.start)
        step_minutes = int(self.STEP.total_seconds() // 60)
        if (
            start.minute % step_minutes != 0
            or start.second != 0
            or start.microsecond != 0
        ):
            raise SeriesError(
                f"series {self.name!r}: start {start.isoformat()} is not aligned "
                f"to a {step_minutes}-minute boundary"
            )
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise SeriesError(f"series {self.name!r}: values must be 1-dimensional")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """First timestamp after the series."""
        return self.start + len(self.values) * self.STEP

    def timestamp(self, i: int) -> datetime:
        return self.start + i * self.STEP

    def has_gaps(self) -> bool:
        return bool(np.isnan(self.values).any())


@dataclass(frozen=True)
class QuarterHourSeries(HourlySeries):
    """Same layout as :class:`HourlySeries` with a 15-minute step."""

    STEP: ClassVar[timedelta] = QUARTER_HOUR


def fill_gaps(series: HourlySeries) -> HourlySeries:
    """Replace missing entries: interior gaps by linear interpolation between
    their non-missing neighbours, leading/trailing gaps by constant extension.

    Idempotent; non-missing values are returned unchanged.
    """
    values = series.values
    known = ~np.isnan(values)
    if not known.any():
        raise SeriesError(f"empty series: {series.name!r} has no observed values")
    if known.all():
        return series
    idx = np.arange(len(values), dtype=np.float64)
    # np.interp extends with the edge values outside the known range, which is
    # exactly the constant extension wanted for leading/trailing gaps.
    filled = np.interp(idx, idx[known], values[known])
    filled[known] = values[known]
    return replace(series, values=filled)


def aggregate_to_hourly(series: QuarterHourSeries) -> HourlySeries:
    """Average each group of four quarter-hours into one hourly value.

    Missing quarter-hours are ignored in the mean; an hour with all four
    missing stays missing.
    """
    if series.start.minute != 0:
        raise SeriesError(
            f"alignment: series {series.name!r} starts at minute "
            f"{series.start.minute}, not on an hour boundary"
        )
    if len(series) % 4 != 0:
        raise SeriesError(
            f"alignment: series {series.name!r} has {len(series)} quarter-hours, "
            "not a multiple of 4"
        )
    blocks = series.values.reshape(-1, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)  # all-NaN hours
        hourly = np.nanmean(blocks, axis=1)
    return HourlySeries(name=series.name, start=series.start, values=hourly)


@dataclass(frozen=True)
class MarketDataset:
    """Aligned hourly panel of the target, both market prices, and features.

    Column roles (target, day-ahead price, balancing price) and the capacity
    are attached by the ingestion layer; :func:`align` produces the bare panel.
    """

    start: datetime
    columns: Mapping[str, np.ndarray]
    capacity: float | None = None
    target_name: str | None = None
    day_ahead_name: str | None = None
    balancing_name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "start", _check_utc(self.start))
        lengths = {name: len(v) for name, v in self.columns.items()}
        if len(set(lengths.values())) > 1:
            raise SeriesError(f"columns have unequal lengths: {lengths}")
        frozen = {}
        for name, vals in self.columns.items():
            arr = np.asarray(vals, dtype=np.float64).copy()
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "columns", frozen)

    @property
    def n_hours(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def timestamp(self, i: int) -> datetime:
        return self.start + i * HOUR

    def timestamps(self) -> list[datetime]:
        return [self.timestamp(i) for i in range(self.n_hours)]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SeriesError(f"dataset has no column {name!r}") from None

    @property
    def target(self) -> np.ndarray:
        return self.column(self._role(self.target_name, "target"))

    @property
    def day_ahead(self) -> np.ndarray:
        return self.column(self._role(self.day_ahead_name, "day-ahead price"))

    @property
    def balancing(self) -> np.ndarray:
        return self.column(self._role(self.balancing_name, "balancing price"))

    def feature_names(self) -> list[str]:
        roles = {self.target_name, self.day_ahead_name, self.balancing_name}
        return [name for name in self.columns if name not in roles]

    def _role(self, name: str | None, what: str) -> str:
        if name is None:
            raise SeriesError(f"dataset has no {what} column assigned")
        return name

    def replace_column(self, name: str, values: np.ndarray) -> "MarketDataset":
        """Copy of the dataset with one column swapped (used by tests/tools)."""
        self.column(name)  # existence check
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=np.float64)
        return replace(self, columns=cols)


def align(series_list: Sequence[HourlySeries]) -> MarketDataset:
    """Trim hourly, gap-free series to their common time range.

    Every output value is one of the input values at the same timestamp; no
    value is invented or interpolated here.
    """
    if not series_list:
        raise SeriesError("no overlap: nothing to align")
    names = [s.name for s in series_list]
    if len(set(names)) != len(names):
        raise SeriesError(f"duplicate series names: {sorted(names)}")
    for s in series_list:
        if type(s) is not HourlySeries:
            raise SeriesError(f"series {s.name!r} is not hourly; aggregate it first")
        if s.has_gaps():
            raise SeriesError(f"series {s.name!r} has missing values; fill gaps first")
    start = max(s.start for s in series_list)
    end = min(s.end for s in series_list)
    if end <= start:
        raise SeriesError("no overlap: series time ranges have empty intersection")
    n = int((end - start) / HOUR)
    columns = {}
    for s in series_list:
        offset = int((start - s.start) / HOUR)
        columns[s.name] = s.values[offset : offset + n]
    return MarketDataset(start=start, columns=columns)
