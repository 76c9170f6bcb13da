"""Dataset ingestion: schema-driven CSV loading and synthetic generation.

File format (documented contract):

* CSV, first column ``timestamp`` holding ISO-8601 UTC stamps such as
  ``2016-02-04T00:00:00Z``; remaining columns as named by the schema; decimal
  point ``.``; an empty cell is a missing value.
* If the schema declares any quarter-hourly feature, rows are stamped every
  15 minutes and must start on an hour boundary; hourly columns are then read
  from the on-the-hour rows only.  Otherwise rows are hourly.
* Skipped stamps are tolerated and treated as missing rows; duplicated or
  out-of-order stamps are rejected.

Schema and synthetic-config files are plain ``key = value`` text, ``#``
comments allowed; ``feature`` keys may repeat.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import CsvParseError, OrderingError, SchemaError
from .timeseries import (
    HOUR,
    QUARTER_HOUR,
    HourlySeries,
    MarketDataset,
    QuarterHourSeries,
    aggregate_to_hourly,
    align,
    fill_gaps,
)

logger = logging.getLogger(__name__)

RESOLUTIONS = ("hourly", "quarter_hourly")


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles of a dataset file plus the production capacity in MWh."""

    target: str
    day_ahead: str
    balancing: str
    features: tuple[tuple[str, str], ...]  # (name, resolution)
    capacity: float

    def __post_init__(self):
        names = [self.target, self.day_ahead, self.balancing] + [n for n, _ in self.features]
        if any(not n for n in names):
            raise SchemaError("schema mismatch: empty column name")
        if len(set(names)) != len(names):
            raise SchemaError(f"schema mismatch: duplicate column names in {names}")
        if not self.features:
            raise SchemaError("schema mismatch: at least one feature column required")
        for name, resolution in self.features:
            if resolution not in RESOLUTIONS:
                raise SchemaError(
                    f"schema mismatch: feature {name!r} has resolution {resolution!r}, "
                    f"expected one of {RESOLUTIONS}"
                )
        if not (np.isfinite(self.capacity) and self.capacity > 0):
            raise SchemaError(f"schema mismatch: capacity must be positive, got {self.capacity}")
        object.__setattr__(self, "features", tuple((n, r) for n, r in self.features))

    @property
    def has_quarter_hourly(self) -> bool:
        return any(r == "quarter_hourly" for _, r in self.features)

    def column_names(self) -> list[str]:
        return [self.target, self.day_ahead, self.balancing] + [n for n, _ in self.features]


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic dataset generator; a fixed seed fixes the bytes."""

    n_hours: int
    coefficients: tuple[float, ...] = (0.6, 0.4)
    noise_scale: float = 5.0
    capacity: float = 100.0
    base_price: float = 40.0
    deviation_scale: float = 10.0
    asymmetry: float = 0.5  # probability that the balancing price dips below day-ahead
    seed: int = 1
    start: datetime = datetime(2016, 1, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        if self.n_hours <= 0:
            raise SchemaError(f"n_hours must be positive, got {self.n_hours}")
        if not self.coefficients:
            raise SchemaError("at least one feature coefficient required")
        if self.noise_scale < 0 or self.deviation_scale < 0:
            raise SchemaError("noise and deviation scales must be nonnegative")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise SchemaError(f"asymmetry must be in [0, 1], got {self.asymmetry}")
        if not (np.isfinite(self.capacity) and self.capacity > 0):
            raise SchemaError(f"capacity must be positive, got {self.capacity}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def schema(self) -> DatasetSchema:
        features = [("benchmark", "hourly")] + [
            (f"f{j + 1}", "hourly") for j in range(len(self.coefficients))
        ]
        return DatasetSchema(
            target="energy",
            day_ahead="price_day_ahead",
            balancing="price_balancing",
            features=tuple(features),
            capacity=self.capacity,
        )


@dataclass
class LoadStats:
    """Diagnostics gathered while loading a file (for the validate command)."""

    rows: int = 0
    first: datetime | None = None
    last: datetime | None = None
    skipped_stamps: int = 0
    gaps: dict[str, int] = field(default_factory=dict)
    clipped_target: int = 0


def parse_timestamp(text: str, row: int) -> datetime:
    try:
        stamp = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError:
        raise CsvParseError(f"parse error at row {row}: bad timestamp {text!r}", row)
    if stamp.tzinfo is None or stamp.utcoffset() != timedelta(0):
        raise CsvParseError(f"parse error at row {row}: timestamp {text!r} is not UTC", row)
    return stamp.astimezone(timezone.utc)


def load_csv(
    path: str | Path, schema: DatasetSchema, with_stats: bool = False
) -> MarketDataset | tuple[MarketDataset, LoadStats]:
    """Load a schema-conforming CSV into an aligned, gap-free dataset.

    Quarter-hourly features are averaged to hourly; remaining gaps are filled
    by interpolation; all columns are trimmed to their common range; target
    values outside [0, capacity] are clipped with a logged warning.
    """
    path = Path(path)
    step = QUARTER_HOUR if schema.has_quarter_hourly else HOUR
    wanted = schema.column_names()

    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"schema mismatch: {path} is empty") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "timestamp":
            raise SchemaError(
                f"schema mismatch: first column must be 'timestamp', got {header[:1]}"
            )
        missing = [name for name in wanted if name not in header]
        if missing:
            raise SchemaError(f"schema mismatch: missing column(s) {missing}")
        col_index = {name: header.index(name) for name in wanted}

        stamps: list[datetime] = []
        cells: list[list[float]] = []
        previous: datetime | None = None
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            stamp = parse_timestamp(row[0], row_no)
            if previous is not None and stamp <= previous:
                raise OrderingError(
                    f"ordering error at row {row_no}: {stamp.isoformat()} does not "
                    f"follow {previous.isoformat()}"
                )
            previous = stamp
            parsed = []
            for name in wanted:
                idx = col_index[name]
                text = row[idx].strip() if idx < len(row) else ""
                if not text:
                    parsed.append(np.nan)
                    continue
                try:
                    parsed.append(float(text))
                except ValueError:
                    raise CsvParseError(
                        f"parse error at row {row_no}, column {name!r}: "
                        f"unparseable value {text!r}",
                        row_no,
                    ) from None
            stamps.append(stamp)
            cells.append(parsed)

    if not stamps:
        raise SchemaError(f"schema mismatch: {path} has no data rows")

    first = stamps[0]
    if schema.has_quarter_hourly and first.minute != 0:
        raise CsvParseError(
            f"parse error at row 2: quarter-hourly file must start on an hour "
            f"boundary, got {first.isoformat()}",
            2,
        )
    n_slots = int((stamps[-1] - first) / step) + 1
    grid = np.full((n_slots, len(wanted)), np.nan)
    for row_no, (stamp, parsed) in enumerate(zip(stamps, cells), start=2):
        offset = (stamp - first) / step
        slot = int(offset)
        if offset != slot:
            raise CsvParseError(
                f"parse error at row {row_no}: timestamp {stamp.isoformat()} is not "
                f"on the {int(step.total_seconds() // 60)}-minute grid",
                row_no,
            )
        grid[slot] = parsed

    stats = LoadStats(rows=len(stamps), first=first, last=stamps[-1])
    stats.skipped_stamps = n_slots - len(stamps)
    if stats.skipped_stamps:
        logger.warning(
            "%s: %d missing row(s) treated as gaps", path.name, stats.skipped_stamps
        )

    resolution = dict(schema.features)
    series = []
    if schema.has_quarter_hourly:
        n_hours = n_slots // 4
        if n_slots % 4:
            logger.warning("%s: trailing partial hour dropped", path.name)
        if n_hours == 0:
            raise SchemaError(f"schema mismatch: {path} has no complete hour of data")
    for name in wanted:
        column = grid[:, wanted.index(name)]
        if schema.has_quarter_hourly:
            if resolution.get(name) == "quarter_hourly":
                quarter = QuarterHourSeries(
                    name=name, start=first, values=column[: n_hours * 4]
                )
                hourly = aggregate_to_hourly(quarter)
            else:
                hourly = HourlySeries(
                    name=name, start=first, values=column[: n_hours * 4 : 4]
                )
        else:
            hourly = HourlySeries(name=name, start=first, values=column)
        stats.gaps[name] = int(np.isnan(hourly.values).sum())
        series.append(fill_gaps(hourly))

    dataset = align(series)
    dataset = replace(
        dataset,
        capacity=schema.capacity,
        target_name=schema.target,
        day_ahead_name=schema.day_ahead,
        balancing_name=schema.balancing,
    )

    target = dataset.columns[schema.target]
    out_of_range = (target > schema.capacity) | (target < 0.0)
    if out_of_range.any():
        stats.clipped_target = int(out_of_range.sum())
        logger.warning(
            "%s: %d target value(s) outside [0, %g] clipped",
            path.name, stats.clipped_target, schema.capacity,
        )
        dataset = dataset.replace_column(
            schema.target, np.clip(target, 0.0, schema.capacity)
        )
    return (dataset, stats) if with_stats else dataset


def generate_synthetic(config: SyntheticConfig) -> MarketDataset:
    """Deterministic desk-scale dataset.

    Features are smooth bounded processes (logistic of an AR(1) walk); the
    target is their weighted sum plus noise, clipped to [0, capacity]; the
    benchmark forecast sees only the first feature's contribution plus its
    own, larger noise; balancing prices deviate from day-ahead prices with a
    tunable probability of landing below them (driving the overproduction
    cost psi_plus).  The draw order below is part of the byte-compatibility
    contract: changing it changes seeded outputs.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_hours
    k = len(config.coefficients)
    coeffs = np.array(config.coefficients)

    phi, sigma = 0.98, 0.35
    z = np.empty((n, k))
    z[0] = rng.standard_normal(k) * (sigma / np.sqrt(1.0 - phi * phi))
    steps = rng.standard_normal((n, k)) * sigma
    for t in range(1, n):
        z[t] = phi * z[t - 1] + steps[t]
    features = config.capacity / (1.0 + np.exp(-z))

    noise_target = rng.standard_normal(n) * config.noise_scale
    energy = np.clip(features @ coeffs + noise_target, 0.0, config.capacity)

    # the benchmark tracks the first driver only; the other drivers enter as
    # their mean level, so its error grows with how much they actually move
    noise_benchmark = rng.standard_normal(n) * (1.5 * config.noise_scale)
    offset = float(coeffs[1:].sum()) * config.capacity / 2.0
    benchmark = np.clip(
        coeffs[0] * features[:, 0] + offset + noise_benchmark, 0.0, config.capacity
    )

    phi_p = 0.95
    sd_p = 0.15 * max(abs(config.base_price), 1.0)
    zp = np.empty(n)
    zp[0] = rng.standard_normal() * sd_p
    steps_p = rng.standard_normal(n) * (sd_p * np.sqrt(1.0 - phi_p * phi_p))
    for t in range(1, n):
        zp[t] = phi_p * zp[t - 1] + steps_p[t]
    day_ahead = config.base_price + zp

    below = rng.random(n) < config.asymmetry
    magnitude = (
        rng.exponential(config.deviation_scale, n)
        if config.deviation_scale > 0
        else np.zeros(n)
    )
    balancing = day_ahead + np.where(below, -magnitude, magnitude)

    columns = {"energy": energy, "price_day_ahead": day_ahead, "price_balancing": balancing,
               "benchmark": benchmark}
    for j in range(k):
        columns[f"f{j + 1}"] = features[:, j]
    return MarketDataset(
        start=config.start,
        columns=columns,
        capacity=config.capacity,
        target_name="energy",
        day_ahead_name="price_day_ahead",
        balancing_name="price_balancing",
    )


def format_timestamp(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_dataset_csv(dataset: MarketDataset, path: str | Path) -> None:
    """Write a dataset in the documented CSV format (hourly rows)."""
    names = list(dataset.columns)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["timestamp"] + names)
        for i in range(dataset.n_hours):
            row = [format_timestamp(dataset.timestamp(i))]
            for name in names:
                value = dataset.columns[name][i]
                row.append("" if np.isnan(value) else repr(float(value)))
            writer.writerow(row)


def write_schema_file(schema: DatasetSchema, path: str | Path) -> None:
    lines = [
        f"target = {schema.target}",
        f"day_ahead = {schema.day_ahead}",
        f"balancing = {schema.balancing}",
        f"capacity = {schema.capacity!r}",
    ]
    lines += [f"feature = {name} {res}" for name, res in schema.features]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_kv_file(path: str | Path) -> list[tuple[str, str]]:
    """Parse ``key = value`` lines; '#' starts a comment; keys may repeat."""
    pairs = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_schema_file(path: str | Path) -> DatasetSchema:
    fields: dict[str, str] = {}
    features: list[tuple[str, str]] = []
    for key, value in parse_kv_file(path):
        if key == "feature":
            parts = value.split()
            if len(parts) not in (1, 2):
                raise SchemaError(f"schema mismatch: bad feature line {value!r}")
            features.append((parts[0], parts[1] if len(parts) == 2 else "hourly"))
        else:
            fields[key] = value
    try:
        return DatasetSchema(
            target=fields["target"],
            day_ahead=fields["day_ahead"],
            balancing=fields["balancing"],
            features=tuple(features),
            capacity=float(fields["capacity"]),
        )
    except KeyError as exc:
        raise SchemaError(f"schema mismatch: missing key {exc.args[0]!r} in {path}") from None
    except ValueError as exc:
        raise SchemaError(f"schema mismatch: {exc}") from None


def parse_synthetic_config(path: str | Path, **overrides) -> SyntheticConfig:
    """Read a synthetic config file; keyword overrides win over file values."""
    values: dict[str, object] = {}
    for key, value in parse_kv_file(path):
        if key == "coefficients":
            values[key] = tuple(float(v) for v in value.replace(",", " ").split())
        elif key in ("n_hours", "seed"):
            values[key] = int(value)
        elif key in ("noise_scale", "capacity", "base_price", "deviation_scale", "asymmetry"):
            values[key] = float(value)
        elif key == "start":
            values[key] = parse_timestamp(value, 0)
        else:
            raise SchemaError(f"unknown synthetic config key {key!r} in {path}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "n_hours" not in values:
        raise SchemaError(f"synthetic config {path} must set n_hours")
    return SyntheticConfig(**values)  # type: ignore[arg-type]
