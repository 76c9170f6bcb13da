"""Report file emission: content, shape, determinism."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from windbid.backtester import (
    TuningEntry,
    TuningTable,
    WindowConfig,
    run_forecast_backtest,
    run_trading_backtest,
)
from windbid.forecaster import ModelSpec
from windbid.ingestion import SyntheticConfig, generate_synthetic
from windbid.reports import write_report, write_tuning_table

SPEC = ModelSpec(features=("f1", "f2"))
CONFIG = WindowConfig(training_length=8, gap=1)


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(SyntheticConfig(n_hours=24 * 35, seed=1, asymmetry=0.7))


@pytest.fixture(scope="module")
def forecast_report(dataset):
    return run_forecast_backtest(dataset, SPEC, CONFIG)


@pytest.fixture(scope="module")
def trade_report(dataset):
    return run_trading_backtest(dataset, SPEC, CONFIG)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestForecastReport:
    def test_file_set(self, forecast_report, tmp_path):
        written = {p.name for p in write_report(forecast_report, tmp_path)}
        assert written == {"hours.csv", "summary.json", "forecast_trace.csv",
                           "coefficients.csv"}

    def test_hours_csv_shape(self, forecast_report, tmp_path):
        write_report(forecast_report, tmp_path)
        rows = read_csv(tmp_path / "hours.csv")
        assert rows[0] == ["timestamp", "actual", "benchmark", "forecast",
                           "psi_minus", "psi_plus", "loss_benchmark", "loss_forecast"]
        assert len(rows) - 1 == forecast_report.n_hours
        assert float(rows[1][1]) == forecast_report.actual[0]

    def test_summary_json(self, forecast_report, tmp_path):
        write_report(forecast_report, tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["mode"] == "forecast"
        assert summary["metrics"]["forecast"]["mae"] == forecast_report.metrics["forecast"].mae
        assert "reductions_percent" in summary

    def test_coefficients_rows_match_windows(self, forecast_report, tmp_path):
        write_report(forecast_report, tmp_path)
        rows = read_csv(tmp_path / "coefficients.csv")
        assert rows[0][3:] == ["const", "f1", "f2"]
        assert len(rows) - 1 == len(forecast_report.windows)

    def test_byte_identical_rewrite(self, forecast_report, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        write_report(forecast_report, first)
        write_report(forecast_report, second)
        for name in ("hours.csv", "summary.json", "coefficients.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestTradeReport:
    def test_file_set(self, trade_report, tmp_path):
        written = {p.name for p in write_report(trade_report, tmp_path)}
        assert written == {"hours.csv", "summary.json", "a_histogram.csv",
                           "a_vs_r.csv", "cumulative_loss_reduction.csv"}

    def test_hours_has_bid_column(self, trade_report, tmp_path):
        write_report(trade_report, tmp_path)
        rows = read_csv(tmp_path / "hours.csv")
        assert "bid" in rows[0] and "loss_two_step" in rows[0]

    def test_cumulative_reduction_consistent(self, trade_report, tmp_path):
        write_report(trade_report, tmp_path)
        rows = read_csv(tmp_path / "cumulative_loss_reduction.csv")
        final = float(rows[-1][1])
        expected = float(
            np.sum(trade_report.losses["benchmark"] - trade_report.losses["two_step"])
        )
        assert final == pytest.approx(expected, rel=1e-9)

    def test_a_vs_r_rows(self, trade_report, tmp_path):
        write_report(trade_report, tmp_path)
        rows = read_csv(tmp_path / "a_vs_r.csv")
        assert rows[0] == ["day", "a", "critical_fractile"]
        assert len(rows) - 1 == len(trade_report.windows)
        assert float(rows[1][1]) == trade_report.windows[0]["a"]


def test_tuning_table_files(tmp_path):
    table = TuningTable(
        entries=[
            TuningEntry(30, True, {"mae": 10.0, "rmse": 8.0, "aol": 6.0}),
            TuningEntry(90, False, None, reason="needs more history"),
        ],
        selected_length=30,
        metric="mae",
        validation_range=(10, 40),
    )
    paths = write_tuning_table(table, tmp_path)
    rows = read_csv(tmp_path / "tuning.csv")
    assert rows[0][0] == "length_days"
    assert rows[1][1] == "yes" and rows[2][1] == "no"
    assert "needs more history" in rows[2][5]
    data = json.loads((tmp_path / "tuning.json").read_text())
    assert data["selected_length"] == 30
    assert {p.name for p in paths} == {"tuning.csv", "tuning.json"}
