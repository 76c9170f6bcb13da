"""Feature-driven improvement of renewable-energy forecasts and market bids.

The pipeline: ingest an hourly market panel (or synthesize one), derive
dual-price settlement costs, fit weighted-L1 linear decision rules over
rolling training windows, and report forecast/bid quality against the
incumbent benchmark forecast.
"""

from .backtester import (
    BacktestReport,
    WindowConfig,
    compute_metrics,
    run_forecast_backtest,
    run_trading_backtest,
    training_rows,
    tune_window_length,
)
from .errors import WindbidError
from .forecaster import (
    DecisionRule,
    FeatureMatrix,
    ModelSpec,
    assemble_features,
    empirical_quantile,
    fit_forecast,
    predict,
)
from .ingestion import (
    DatasetSchema,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    parse_schema_file,
    write_dataset_csv,
    write_schema_file,
)
from .lp import LinearProgram, LpSolution, WeightedL1Problem, solve, solve_weighted_l1
from .reports import write_report, write_tuning_table
from .settlement import derive_settlement, opportunity_loss, revenue
from .timeseries import (
    HourlySeries,
    MarketDataset,
    QuarterHourSeries,
    aggregate_to_hourly,
    align,
    fill_gaps,
)
from .trader import TradingRule, bid, critical_fractile, fit_trading

__version__ = "0.1.0"

__all__ = [
    "BacktestReport",
    "DatasetSchema",
    "DecisionRule",
    "FeatureMatrix",
    "HourlySeries",
    "LinearProgram",
    "LpSolution",
    "MarketDataset",
    "ModelSpec",
    "QuarterHourSeries",
    "SyntheticConfig",
    "TradingRule",
    "WeightedL1Problem",
    "WindbidError",
    "WindowConfig",
    "aggregate_to_hourly",
    "align",
    "assemble_features",
    "bid",
    "compute_metrics",
    "critical_fractile",
    "derive_settlement",
    "empirical_quantile",
    "fill_gaps",
    "fit_forecast",
    "fit_trading",
    "generate_synthetic",
    "load_csv",
    "opportunity_loss",
    "parse_schema_file",
    "predict",
    "revenue",
    "run_forecast_backtest",
    "run_trading_backtest",
    "solve",
    "solve_weighted_l1",
    "training_rows",
    "tune_window_length",
    "write_dataset_csv",
    "write_report",
    "write_schema_file",
    "write_tuning_table",
]
