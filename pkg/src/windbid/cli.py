"""Command line: validate/synthesize datasets, run backtests, tune windows.

Exit codes: 0 success, 2 input or validation error, 3 I/O error, 4 solver
failure.  Every knob is a flag; an optional ``--config`` key=value file may
set defaults for any long flag, with explicit flags winning.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backtester import (
    WindowConfig,
    run_forecast_backtest,
    run_trading_backtest,
    tune_window_length,
)
from .errors import (
    CsvParseError,
    FitError,
    OrderingError,
    SchemaError,
    SeriesError,
    SolverError,
)
from .forecaster import ModelSpec
from .ingestion import (
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    parse_kv_file,
    parse_schema_file,
    parse_synthetic_config,
    parse_timestamp,
    write_dataset_csv,
    write_schema_file,
)
from .reports import write_report, write_tuning_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_SOLVER = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windbid",
        description="Feature-driven forecast improvement and day-ahead bidding",
    )
    parser.add_argument("--config", help="key=value file with defaults for any flag")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="dataset CSV path")
        p.add_argument("--schema", required=True, help="schema key=value file")

    def add_model_flags(p):
        p.add_argument("--spec", default="", help="comma-separated feature columns")
        p.add_argument("--hour-dummies", action="store_true")
        p.add_argument("--weekday-dummies", action="store_true")
        p.add_argument("--no-constant", action="store_true")
        p.add_argument("--benchmark", default="benchmark",
                       help="benchmark forecast column (default: benchmark)")

    def add_window_flags(p):
        p.add_argument("--window-days", type=int, default=30)
        p.add_argument("--gap-days", type=int, default=1)
        p.add_argument("--retrain-every", type=int, default=1)
        p.add_argument("--month-unit", type=int, default=30,
                       help="days per month when grids are given in months")

    validate = sub.add_parser("validate", help="check a dataset file against a schema")
    add_data_flags(validate)
    validate.set_defaults(func=cmd_validate)

    synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth.add_argument("--synth-config", help="key=value synthetic config file")
    synth.add_argument("--n-hours", type=int)
    synth.add_argument("--coefficients", help="comma/space separated, e.g. '0.6,0.4'")
    synth.add_argument("--noise-scale", type=float)
    synth.add_argument("--capacity", type=float)
    synth.add_argument("--base-price", type=float)
    synth.add_argument("--deviation-scale", type=float)
    synth.add_argument("--asymmetry", type=float)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--start")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--schema-out", help="schema output path (default: <out>.schema.txt)")
    synth.set_defaults(func=cmd_synth)

    backtest = sub.add_parser("backtest", help="rolling-window backtest")
    add_data_flags(backtest)
    add_model_flags(backtest)
    add_window_flags(backtest)
    backtest.add_argument("--mode", choices=("forecast", "trade"), default="forecast")
    backtest.add_argument("--trade-window-days", type=int,
                          help="trading window length (default: --window-days)")
    backtest.add_argument("--unit-psi", action="store_true",
                          help="replace settlement costs with 1 (AOL becomes MAE)")
    backtest.add_argument("--test-start-day", type=int)
    backtest.add_argument("--test-days", type=int)
    backtest.add_argument("--jobs", type=int, default=1)
    backtest.add_argument("--out", required=True, help="report output directory")
    backtest.set_defaults(func=cmd_backtest)

    tune = sub.add_parser("tune", help="window-length tuning table")
    add_data_flags(tune)
    add_model_flags(tune)
    add_window_flags(tune)
    tune.add_argument("--mode", choices=("forecast", "trade"), default="forecast")
    tune.add_argument("--grid", help="comma-separated window lengths in days")
    tune.add_argument("--grid-months", help="comma-separated lengths in months")
    tune.add_argument("--val-start-day", type=int, required=True)
    tune.add_argument("--val-days", type=int, required=True)
    tune.add_argument("--unit-psi", action="store_true")
    tune.add_argument("--jobs", type=int, default=1)
    tune.add_argument("--out", required=True, help="tuning output directory")
    tune.set_defaults(func=cmd_tune)
    return parser


_COMMANDS = ("validate", "synth", "backtest", "tune")


def _merge_config_argv(argv: list[str]) -> list[str]:
    """Inject --config file entries as flags right after the subcommand.

    Explicit flags come later on the line, so argparse lets them win.  A
    boolean key set to true inserts the bare flag.
    """
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    extra: list[str] = []
    for key, value in parse_kv_file(known.config):
        flag = "--" + key.replace("_", "-")
        lowered = value.lower()
        if lowered in ("true", "yes", "on"):
            extra.append(flag)
        elif lowered in ("false", "no", "off"):
            continue
        else:
            extra.extend([flag, value])
    for i, token in enumerate(argv):
        if token in _COMMANDS and (i == 0 or argv[i - 1] != "--config"):
            return argv[: i + 1] + extra + argv[i + 1 :]
    return argv


def _model_spec(args) -> ModelSpec:
    features = tuple(name.strip() for name in args.spec.split(",") if name.strip())
    return ModelSpec(
        features=features,
        include_constant=not args.no_constant,
        include_hour_dummies=args.hour_dummies,
        include_weekday_dummies=args.weekday_dummies,
    )


def _window_config(args, length=None) -> WindowConfig:
    return WindowConfig(
        training_length=int(length if length is not None else args.window_days),
        gap=int(args.gap_days),
        retrain_every=int(args.retrain_every),
        month_unit=int(args.month_unit),
    )


def cmd_validate(args) -> int:
    schema = parse_schema_file(args.schema)
    dataset, stats = load_csv(args.data, schema, with_stats=True)
    print(f"rows: {stats.rows}")
    print(f"range: {stats.first.isoformat()} .. {stats.last.isoformat()}")
    print(f"hours after alignment: {dataset.n_hours}")
    print(f"skipped stamps: {stats.skipped_stamps}")
    for name, count in stats.gaps.items():
        print(f"gaps[{name}]: {count}")
    print(f"clipped target values: {stats.clipped_target}")
    return EXIT_OK


def cmd_synth(args) -> int:
    overrides = dict(
        n_hours=args.n_hours,
        noise_scale=args.noise_scale,
        capacity=args.capacity,
        base_price=args.base_price,
        deviation_scale=args.deviation_scale,
        asymmetry=args.asymmetry,
        seed=args.seed,
    )
    if args.coefficients:
        overrides["coefficients"] = tuple(
            float(v) for v in str(args.coefficients).replace(",", " ").split()
        )
    if args.start:
        overrides["start"] = parse_timestamp(str(args.start), 0)
    if args.synth_config:
        config = parse_synthetic_config(args.synth_config, **overrides)
    else:
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if "n_hours" not in overrides:
            raise SchemaError("synth needs --n-hours or a --synth-config file")
        config = SyntheticConfig(**overrides)
    dataset = generate_synthetic(config)
    out = Path(args.out)
    write_dataset_csv(dataset, out)
    schema_out = Path(args.schema_out) if args.schema_out else out.with_suffix(".schema.txt")
    write_schema_file(config.schema(), schema_out)
    print(f"wrote {out} ({dataset.n_hours} rows)")
    print(f"wrote {schema_out}")
    return EXIT_OK


def _print_metrics(report) -> None:
    for name, metrics in report.metrics.items():
        print(
            f"{name}: MAE={metrics.mae:.6f} RMSE={metrics.rmse:.6f} "
            f"AOL={metrics.aol:.6f}"
        )
    for name, reductions in report.reductions.items():
        parts = []
        for key in ("mae", "rmse", "aol"):
            value = reductions[key]
            parts.append(
                f"{key.upper()} undefined (benchmark is exact)"
                if value is None
                else f"{key.upper()} {value:+.4f}%"
            )
        print(f"reduction[{name} vs benchmark]: " + ", ".join(parts))


def cmd_backtest(args) -> int:
    schema = parse_schema_file(args.schema)
    dataset = load_csv(args.data, schema)
    spec = _model_spec(args)
    config = _window_config(args)
    test_range = None
    if args.test_start_day is not None or args.test_days is not None:
        start = args.test_start_day or 0
        days = args.test_days or 10**9
        test_range = (start, start + days)
    if args.mode == "forecast":
        report = run_forecast_backtest(
            dataset, spec, config, benchmark=args.benchmark,
            unit_psi=args.unit_psi, test_range=test_range, jobs=args.jobs,
        )
    else:
        trading_config = None
        if args.trade_window_days is not None:
            trading_config = _window_config(args, length=args.trade_window_days)
        report = run_trading_backtest(
            dataset, spec, config, trading_config=trading_config,
            benchmark=args.benchmark, unit_psi=args.unit_psi,
            test_range=test_range, jobs=args.jobs,
        )
    written = write_report(report, args.out)
    print(f"test days: {len(report.test_days)} ({report.n_hours} hours)")
    _print_metrics(report)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    schema = parse_schema_file(args.schema)
    dataset = load_csv(args.data, schema)
    spec = _model_spec(args)
    config = _window_config(args)
    if bool(args.grid) == bool(args.grid_months):
        raise SchemaError("tune needs exactly one of --grid or --grid-months")
    if args.grid:
        lengths = [int(v) for v in str(args.grid).replace(",", " ").split()]
    else:
        months = [int(v) for v in str(args.grid_months).replace(",", " ").split()]
        lengths = [m * config.month_unit for m in months]
    validation = (args.val_start_day, args.val_start_day + args.val_days)
    table = tune_window_length(
        dataset, spec, lengths, validation, config=config, mode=args.mode,
        benchmark=args.benchmark, unit_psi=args.unit_psi, jobs=args.jobs,
    )
    written = write_tuning_table(table, args.out)
    for entry in table.entries:
        if entry.available:
            shown = {k: v for k, v in (entry.reductions or {}).items()}
            print(f"length {entry.length_days}d: {shown}")
        else:
            print(f"length {entry.length_days}d: unavailable ({entry.reason})")
    if table.selected_length is None:
        print("selected length: none (no grid entry was usable)")
    else:
        print(f"selected length: {table.selected_length}d")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_merge_config_argv(argv))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # argparse exits on bad flags / --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SchemaError, CsvParseError, OrderingError, SeriesError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
