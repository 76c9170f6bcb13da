"""Rolling-window backtesting: daily retrain, forecast/bid, settle, report.

Days are consecutive 24-hour UTC blocks starting at the first midnight in the
dataset.  For test day ``d`` the training window covers days
``[d - gap - length, d - gap)``: the gap models the hours whose outcomes are
not yet known when the day-ahead bid is built, so nothing from the gap or the
test day itself ever reaches a fit.  Retraining happens every
``retrain_every`` days; the rule fitted on day ``d`` serves all days of its
block, with feature scaling frozen at fit time.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Sequence

import numpy as np

from .errors import FitError, SeriesError, WindbidError
from .forecaster import ModelSpec, assemble_features, fit_forecast, predict
from .lp import SimplexSolver
from .settlement import derive_settlement_arrays, opportunity_loss
from .timeseries import MarketDataset
from .trader import TradingRule, bid, critical_fractile, fit_trading

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class WindowConfig:
    """Rolling-window geometry, in days."""

    training_length: int
    gap: int = 1
    retrain_every: int = 1
    month_unit: int = 30  # days per "month" when grids are given in months

    def __post_init__(self):
        if self.training_length < 1:
            raise FitError(f"training_length must be >= 1, got {self.training_length}")
        if self.gap < 0:
            raise FitError(f"gap must be >= 0, got {self.gap}")
        if self.retrain_every < 1:
            raise FitError(f"retrain_every must be >= 1, got {self.retrain_every}")
        if self.month_unit < 1:
            raise FitError(f"month_unit must be >= 1, got {self.month_unit}")

    @property
    def min_history_days(self) -> int:
        return self.training_length + self.gap


@dataclass(frozen=True)
class DayGrid:
    """Maps market days to hour rows of a dataset."""

    offset: int
    n_days: int

    @classmethod
    def for_dataset(cls, dataset: MarketDataset) -> "DayGrid":
        offset = (HOURS_PER_DAY - dataset.start.hour) % HOURS_PER_DAY
        n_days = (dataset.n_hours - offset) // HOURS_PER_DAY
        return cls(offset=offset, n_days=n_days)

    def rows(self, day: int) -> np.ndarray:
        start = self.offset + day * HOURS_PER_DAY
        return np.arange(start, start + HOURS_PER_DAY)

    def day_span_rows(self, first_day: int, last_day: int) -> np.ndarray:
        return np.arange(
            self.offset + first_day * HOURS_PER_DAY, self.offset + last_day * HOURS_PER_DAY
        )


def training_rows(t_day: int, config: WindowConfig, grid: DayGrid) -> np.ndarray:
    """Hour rows of days ``[t_day - gap - length, t_day - gap)``."""
    first = t_day - config.gap - config.training_length
    last = t_day - config.gap
    if first < 0:
        raise FitError(
            f"insufficient history for day {t_day}: window would start at day {first}"
        )
    if t_day >= grid.n_days:
        raise FitError(f"day {t_day} beyond data range of {grid.n_days} days")
    return grid.day_span_rows(first, last)


@dataclass
class StrategyMetrics:
    mae: float
    rmse: float
    aol: float

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "aol": self.aol}


def compute_metrics(actuals, predictions, psi_minus, psi_plus) -> StrategyMetrics:
    """MAE, RMSE (sqrt of mean square), and mean opportunity loss."""
    actuals = np.asarray(actuals, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if actuals.shape != predictions.shape or actuals.size == 0:
        raise FitError("metrics need nonempty series of equal length")
    errors = actuals - predictions
    loss = opportunity_loss(actuals, predictions, psi_minus, psi_plus)
    return StrategyMetrics(
        mae=float(np.abs(errors).mean()),
        rmse=float(np.sqrt(np.mean(errors**2))),
        aol=float(np.mean(loss)),
    )


def reduction_percent(benchmark: float, model: float) -> float | None:
    """``100 * (benchmark - model) / benchmark``; None when undefined."""
    if benchmark == 0.0:
        return None
    return 100.0 * (benchmark - model) / benchmark


@dataclass
class BacktestReport:
    """Per-hour records plus aggregates; everything recomputable from rows."""

    mode: str
    capacity: float
    config: dict
    timestamps: list[datetime]
    actual: np.ndarray
    benchmark: np.ndarray
    forecast: np.ndarray
    psi_minus: np.ndarray
    psi_plus: np.ndarray
    losses: dict[str, np.ndarray]
    metrics: dict[str, StrategyMetrics]
    reductions: dict[str, dict[str, float | None]]
    windows: list[dict]
    skipped_days: list[int]
    bid: np.ndarray | None = None
    test_days: list[int] = field(default_factory=list)

    @property
    def n_hours(self) -> int:
        return len(self.timestamps)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "capacity": self.capacity,
            "config": self.config,
            "test_days": len(self.test_days),
            "test_hours": self.n_hours,
            "skipped_days": self.skipped_days,
            "metrics": {k: m.as_dict() for k, m in self.metrics.items()},
            "reductions_percent": self.reductions,
        }


def _fit_blocks(first_day: int, n_days: int, retrain_every: int) -> list[tuple[int, int]]:
    """(fit day, block end) pairs covering [first_day, n_days)."""
    return [
        (day, min(day + retrain_every, n_days))
        for day in range(first_day, n_days, retrain_every)
    ]


def _window_id(day: int, config: WindowConfig) -> str:
    first = day - config.gap - config.training_length
    last = day - config.gap
    return f"d{first:05d}-d{last:05d}"


def _run_blocks(blocks, worker: Callable, jobs: int) -> list:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, blocks))
    return [worker(block) for block in blocks]


def _forecast_pass(
    dataset: MarketDataset,
    spec: ModelSpec,
    config: WindowConfig,
    grid: DayGrid,
    first_day: int,
    last_day: int,
    solver: SimplexSolver | None,
    jobs: int,
) -> tuple[np.ndarray, list[dict], list[int]]:
    """Out-of-sample forecasts for all days in [first_day, last_day).

    Returns hourly forecasts (NaN where unavailable), per-fit diagnostics,
    and the days skipped because their fit failed.
    """
    capacity = dataset.capacity
    if capacity is None:
        raise SeriesError("dataset has no capacity set; load it through a schema")
    target = dataset.target
    forecasts = np.full(dataset.n_hours, np.nan)
    blocks = _fit_blocks(first_day, last_day, config.retrain_every)

    def fit_block(block: tuple[int, int]):
        day, end = block
        rows = training_rows(day, config, grid)
        query = grid.day_span_rows(day, end)
        train_fm, query_fm = assemble_features(dataset, spec, rows, query)
        rule = fit_forecast(
            train_fm, target[rows], capacity, window_id=_window_id(day, config),
            solver=solver,
        )
        return query, predict(rule, query_fm), rule

    skipped: list[int] = []
    windows: list[dict] = []
    results = _run_blocks(blocks, lambda b: _try_block(fit_block, b, skipped), jobs)
    for block, result in zip(blocks, results):
        if result is None:
            continue
        query, preds, rule = result
        forecasts[query] = preds
        windows.append(
            {
                "day": block[0],
                "window_id": rule.window_id,
                "objective": rule.objective,
                "columns": list(rule.columns),
                "coefficients": [float(v) for v in rule.coefficients],
                "scale_factors": [float(v) for v in rule.scale_factors],
            }
        )
    return forecasts, windows, sorted(skipped)


def _try_block(fit_block, block, skipped: list[int]):
    try:
        return fit_block(block)
    except WindbidError as exc:
        logger.warning("fit for days [%d, %d) failed: %s", block[0], block[1], exc)
        skipped.extend(range(block[0], block[1]))
        return None


def _psi_arrays(dataset: MarketDataset, unit_psi: bool) -> tuple[np.ndarray, np.ndarray]:
    if unit_psi:
        ones = np.ones(dataset.n_hours)
        return ones, ones.copy()
    return derive_settlement_arrays(dataset.day_ahead, dataset.balancing)


def _resolve_test_range(
    grid: DayGrid, first_feasible: int, test_range: tuple[int, int] | None
) -> tuple[int, int]:
    if test_range is None:
        return first_feasible, grid.n_days
    lo, hi = test_range
    return max(first_feasible, lo), min(grid.n_days, hi)


def run_forecast_backtest(
    dataset: MarketDataset,
    spec: ModelSpec,
    config: WindowConfig,
    benchmark: str = "benchmark",
    unit_psi: bool = False,
    test_range: tuple[int, int] | None = None,
    solver: SimplexSolver | None = None,
    jobs: int = 1,
) -> BacktestReport:
    """Daily re-fit of the forecast rule; MAE/RMSE/AOL versus the benchmark."""
    grid = DayGrid.for_dataset(dataset)
    first_day = config.min_history_days
    lo, hi = _resolve_test_range(grid, first_day, test_range)
    if lo >= hi:
        raise FitError(
            f"dataset spans {grid.n_days} day(s); too short for "
            f"{config.training_length}d window + {config.gap}d gap"
        )
    benchmark_values = dataset.column(benchmark)
    forecasts, windows, skipped = _forecast_pass(
        dataset, spec, config, grid, lo, hi, solver, jobs
    )
    psi_minus, psi_plus = _psi_arrays(dataset, unit_psi)

    test_days = [d for d in range(lo, hi) if d not in set(skipped)]
    rows = (
        np.concatenate([grid.rows(d) for d in test_days])
        if test_days
        else np.empty(0, dtype=np.int64)
    )
    if rows.size == 0:
        raise FitError("no test days survived; every fit failed")

    actual = dataset.target[rows]
    bench = benchmark_values[rows]
    fcst = forecasts[rows]
    pm, pp = psi_minus[rows], psi_plus[rows]
    metrics = {
        "benchmark": compute_metrics(actual, bench, pm, pp),
        "forecast": compute_metrics(actual, fcst, pm, pp),
    }
    reductions = {
        "forecast": {
            key: reduction_percent(
                getattr(metrics["benchmark"], key), getattr(metrics["forecast"], key)
            )
            for key in ("mae", "rmse", "aol")
        }
    }
    return BacktestReport(
        mode="forecast",
        capacity=float(dataset.capacity),
        config={
            "training_length": config.training_length,
            "gap": config.gap,
            "retrain_every": config.retrain_every,
            "benchmark": benchmark,
            "unit_psi": unit_psi,
            "spec": {
                "features": list(spec.features),
                "include_constant": spec.include_constant,
                "include_hour_dummies": spec.include_hour_dummies,
                "include_weekday_dummies": spec.include_weekday_dummies,
            },
            "test_range": [lo, hi],
        },
        timestamps=[dataset.timestamp(int(i)) for i in rows],
        actual=actual,
        benchmark=bench,
        forecast=fcst,
        psi_minus=pm,
        psi_plus=pp,
        losses={
            "benchmark": opportunity_loss(actual, bench, pm, pp),
            "forecast": opportunity_loss(actual, fcst, pm, pp),
        },
        metrics=metrics,
        reductions=reductions,
        windows=windows,
        skipped_days=skipped,
        test_days=test_days,
    )


def run_trading_backtest(
    dataset: MarketDataset,
    forecast_spec: ModelSpec,
    config: WindowConfig,
    trading_config: WindowConfig | None = None,
    benchmark: str = "benchmark",
    unit_psi: bool = False,
    test_range: tuple[int, int] | None = None,
    solver: SimplexSolver | None = None,
    jobs: int = 1,
) -> BacktestReport:
    """Two-step trading: improve the forecast, then rescale it for bidding.

    The improved forecast ``w_hat`` is produced out-of-sample for every day
    the forecaster can reach, so the trading window always trains on bids the
    producer could actually have formed at the time.  Reported strategies:
    bidding the benchmark, bidding ``w_hat``, and the two-step bid.
    """
    tc = trading_config or config
    grid = DayGrid.for_dataset(dataset)
    fc_first = config.min_history_days
    trade_first = fc_first + tc.min_history_days
    lo, hi = _resolve_test_range(grid, trade_first, test_range)
    if lo >= hi:
        raise FitError(
            f"dataset spans {grid.n_days} day(s); too short for the cascaded "
            f"windows ({config.training_length}+{config.gap} forecast, "
            f"{tc.training_length}+{tc.gap} trading days)"
        )
    capacity = float(dataset.capacity)
    benchmark_values = dataset.column(benchmark)
    # stage 1: out-of-sample improved forecasts for trading windows + test days
    w_hat, _, fc_skipped = _forecast_pass(
        dataset, forecast_spec, config, grid, fc_first, hi, solver, jobs
    )
    psi_minus, psi_plus = _psi_arrays(dataset, unit_psi)
    target = dataset.target

    bids = np.full(dataset.n_hours, np.nan)
    windows: list[dict] = []
    skipped: list[int] = sorted(set(fc_skipped) & set(range(lo, hi)))
    rule: TradingRule | None = None
    rule_r = float("nan")
    for day in range(lo, hi):
        if day in fc_skipped:
            continue
        if rule is None or (day - lo) % tc.retrain_every == 0:
            try:
                window = training_rows(day, tc, grid)
                usable = window[~np.isnan(w_hat[window])]
                if len(usable) < len(window):
                    logger.warning(
                        "trading window for day %d: %d hour(s) lack forecasts",
                        day, len(window) - len(usable),
                    )
                if len(usable) == 0:
                    raise FitError("trading window has no usable forecasts")
                rule = fit_trading(
                    w_hat[usable], target[usable],
                    psi_minus[usable], psi_plus[usable],
                    window_id=_window_id(day, tc),
                )
                rule_r = critical_fractile(psi_minus[usable], psi_plus[usable])
                windows.append(
                    {
                        "day": day,
                        "window_id": rule.window_id,
                        "a": rule.coefficient,
                        "critical_fractile": rule_r,
                    }
                )
            except WindbidError as exc:
                logger.warning("trading fit for day %d failed: %s", day, exc)
                rule = None
        if rule is None:
            skipped.append(day)
            continue
        rows = grid.rows(day)
        bids[rows] = bid(rule, w_hat[rows], capacity)

    skipped = sorted(set(skipped))
    test_days = [d for d in range(lo, hi) if d not in set(skipped)]
    if not test_days:
        raise FitError("no test days survived the cascaded windows")
    rows = np.concatenate([grid.rows(d) for d in test_days])

    actual = target[rows]
    bench = benchmark_values[rows]
    fcst = w_hat[rows]
    bid_values = bids[rows]
    pm, pp = psi_minus[rows], psi_plus[rows]
    metrics = {
        "benchmark": compute_metrics(actual, bench, pm, pp),
        "forecast": compute_metrics(actual, fcst, pm, pp),
        "two_step": compute_metrics(actual, bid_values, pm, pp),
    }
    reductions = {
        name: {
            key: reduction_percent(
                getattr(metrics["benchmark"], key), getattr(metrics[name], key)
            )
            for key in ("mae", "rmse", "aol")
        }
        for name in ("forecast", "two_step")
    }
    return BacktestReport(
        mode="trade",
        capacity=capacity,
        config={
            "training_length": config.training_length,
            "gap": config.gap,
            "retrain_every": config.retrain_every,
            "trading_length": tc.training_length,
            "trading_gap": tc.gap,
            "trading_retrain_every": tc.retrain_every,
            "benchmark": benchmark,
            "unit_psi": unit_psi,
            "spec": {
                "features": list(forecast_spec.features),
                "include_constant": forecast_spec.include_constant,
                "include_hour_dummies": forecast_spec.include_hour_dummies,
                "include_weekday_dummies": forecast_spec.include_weekday_dummies,
            },
            "test_range": [lo, hi],
        },
        timestamps=[dataset.timestamp(int(i)) for i in rows],
        actual=actual,
        benchmark=bench,
        forecast=fcst,
        bid=bid_values,
        psi_minus=pm,
        psi_plus=pp,
        losses={
            "benchmark": opportunity_loss(actual, bench, pm, pp),
            "forecast": opportunity_loss(actual, fcst, pm, pp),
            "two_step": opportunity_loss(actual, bid_values, pm, pp),
        },
        metrics=metrics,
        reductions=reductions,
        windows=windows,
        skipped_days=skipped,
        test_days=test_days,
    )


@dataclass
class TuningEntry:
    length_days: int
    available: bool
    reductions: dict[str, float | None] | None
    reason: str = ""


@dataclass
class TuningTable:
    entries: list[TuningEntry]
    selected_length: int | None
    metric: str
    validation_range: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "validation_range": list(self.validation_range),
            "selected_length": self.selected_length,
            "entries": [
                {
                    "length_days": e.length_days,
                    "available": e.available,
                    "reductions_percent": e.reductions,
                    "reason": e.reason,
                }
                for e in self.entries
            ],
        }


def tune_window_length(
    dataset: MarketDataset,
    spec: ModelSpec,
    lengths_days: Sequence[int],
    validation_range: tuple[int, int],
    config: WindowConfig | None = None,
    mode: str = "forecast",
    benchmark: str = "benchmark",
    unit_psi: bool = False,
    solver: SimplexSolver | None = None,
    jobs: int = 1,
) -> TuningTable:
    """One backtest per window length over a fixed validation day range.

    Lengths whose window cannot reach the start of the validation range are
    marked unavailable, which keeps the evaluated days identical across the
    remaining lengths.  Selection picks the largest reduction of the mode's
    headline metric (MAE for forecasting, AOL for trading); ties go to the
    shorter window.
    """
    if mode not in ("forecast", "trade"):
        raise FitError(f"mode must be 'forecast' or 'trade', got {mode!r}")
    template = config or WindowConfig(training_length=1)
    metric = "mae" if mode == "forecast" else "aol"
    strategy = "forecast" if mode == "forecast" else "two_step"
    entries: list[TuningEntry] = []
    for length in lengths_days:
        candidate = WindowConfig(
            training_length=int(length),
            gap=template.gap,
            retrain_every=template.retrain_every,
            month_unit=template.month_unit,
        )
        needed = candidate.min_history_days
        if mode == "trade":
            needed += candidate.min_history_days
        if needed > validation_range[0]:
            entries.append(
                TuningEntry(
                    length_days=int(length),
                    available=False,
                    reductions=None,
                    reason=f"needs {needed} day(s) of history before the validation range",
                )
            )
            continue
        try:
            if mode == "forecast":
                report = run_forecast_backtest(
                    dataset, spec, candidate, benchmark=benchmark, unit_psi=unit_psi,
                    test_range=validation_range, solver=solver, jobs=jobs,
                )
            else:
                report = run_trading_backtest(
                    dataset, spec, candidate, benchmark=benchmark, unit_psi=unit_psi,
                    test_range=validation_range, solver=solver, jobs=jobs,
                )
        except WindbidError as exc:
            entries.append(
                TuningEntry(int(length), False, None, reason=str(exc))
            )
            continue
        entries.append(TuningEntry(int(length), True, report.reductions[strategy]))
    return TuningTable(
        entries=entries,
        selected_length=select_length(entries, metric),
        metric=metric,
        validation_range=(validation_range[0], validation_range[1]),
    )


def select_length(entries: Sequence[TuningEntry], metric: str) -> int | None:
    """Largest reduction wins; ties (within 1e-12) go to the shorter window."""
    best: tuple[float, int] | None = None
    for entry in entries:
        if not entry.available or entry.reductions is None:
            continue
        value = entry.reductions.get(metric)
        if value is None:
            continue
        if (
            best is None
            or value > best[0] + 1e-12
            or (abs(value - best[0]) <= 1e-12 and entry.length_days < best[1])
        ):
            best = (value, entry.length_days)
    return None if best is None else best[1]
