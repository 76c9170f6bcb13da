"""Report files: per-hour CSV, aggregate JSON, and plot-ready CSV extracts.

All numeric cells use ``repr`` of the Python float (shortest round-trip), so
identical runs write byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .backtester import BacktestReport, TuningTable
from .ingestion import format_timestamp


def _cell(value: float) -> str:
    return "" if np.isnan(value) else repr(float(value))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_report(report: BacktestReport, outdir: str | Path) -> list[Path]:
    """Write the full report file set; returns the paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, header: list[str], rows) -> None:
        path = outdir / name
        _write_csv(path, header, rows)
        written.append(path)

    # per-hour records
    header = ["timestamp", "actual", "benchmark", "forecast"]
    columns = [report.actual, report.benchmark, report.forecast]
    if report.bid is not None:
        header.append("bid")
        columns.append(report.bid)
    header += ["psi_minus", "psi_plus"]
    columns += [report.psi_minus, report.psi_plus]
    for name in report.losses:
        header.append(f"loss_{name}")
        columns.append(report.losses[name])
    emit(
        "hours.csv",
        header,
        (
            [format_timestamp(ts)] + [_cell(col[i]) for col in columns]
            for i, ts in enumerate(report.timestamps)
        ),
    )

    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(report.summary(), sort_keys=True, indent=2) + "\n")
    written.append(summary_path)

    if report.mode == "forecast":
        emit(
            "forecast_trace.csv",
            ["timestamp", "actual", "benchmark", "forecast"],
            (
                [
                    format_timestamp(ts),
                    _cell(report.actual[i]),
                    _cell(report.benchmark[i]),
                    _cell(report.forecast[i]),
                ]
                for i, ts in enumerate(report.timestamps)
            ),
        )
        if report.windows:
            names = report.windows[0]["columns"]
            emit(
                "coefficients.csv",
                ["day", "window_id", "objective"] + list(names),
                (
                    [str(w["day"]), w["window_id"], _cell(w["objective"])]
                    + [_cell(c) for c in w["coefficients"]]
                    for w in report.windows
                ),
            )
    else:
        emit(
            "a_histogram.csv",
            ["a"],
            ([_cell(w["a"])] for w in report.windows),
        )
        emit(
            "a_vs_r.csv",
            ["day", "a", "critical_fractile"],
            (
                [str(w["day"]), _cell(w["a"]), _cell(w["critical_fractile"])]
                for w in report.windows
            ),
        )
        cumulative = np.cumsum(report.losses["benchmark"] - report.losses["two_step"])
        emit(
            "cumulative_loss_reduction.csv",
            ["timestamp", "cumulative_reduction_eur"],
            (
                [format_timestamp(ts), _cell(cumulative[i])]
                for i, ts in enumerate(report.timestamps)
            ),
        )
    return written


def write_tuning_table(table: TuningTable, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "tuning.csv"
    rows = []
    for entry in table.entries:
        if entry.available:
            red = entry.reductions or {}
            rows.append(
                [str(entry.length_days), "yes"]
                + [_cell(red.get(k) if red.get(k) is not None else float("nan"))
                   for k in ("mae", "rmse", "aol")]
                + [""]
            )
        else:
            rows.append([str(entry.length_days), "no", "", "", "", entry.reason])
    _write_csv(
        csv_path,
        ["length_days", "available", "mae_reduction", "rmse_reduction",
         "aol_reduction", "note"],
        rows,
    )
    json_path = outdir / "tuning.json"
    json_path.write_text(json.dumps(table.as_dict(), sort_keys=True, indent=2) + "\n")
    return [csv_path, json_path]
