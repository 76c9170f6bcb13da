"""CSV loading, schema parsing, synthetic generation."""

from __future__ import annotations

import logging
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from windbid.errors import CsvParseError, OrderingError, SchemaError
from windbid.ingestion import (
    DatasetSchema,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    parse_schema_file,
    parse_synthetic_config,
    write_dataset_csv,
    write_schema_file,
)
from windbid.settlement import derive_settlement_arrays

T0 = datetime(2016, 2, 4, tzinfo=timezone.utc)


def schema(features=(("bm", "hourly"),), capacity=100.0):
    return DatasetSchema(
        target="e", day_ahead="da", balancing="bal", features=features, capacity=capacity
    )


def write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n")
    return path


def hourly_rows(n, columns, start=T0):
    rows = []
    for i in range(n):
        stamp = (start + timedelta(hours=i)).strftime("%Y-%m-%dT%H:%M:%SZ")
        rows.append([stamp] + [c[i] for c in columns])
    return rows


class TestLoadCsv:
    def test_direct_hourly_load(self, tmp_path):
        cols = [["1", "2", "3", "4"], ["30", "31", "32", "33"],
                ["20", "21", "22", "23"], ["1.5", "2.5", "3.5", "4.5"]]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"],
                         hourly_rows(4, cols))
        ds = load_csv(path, schema())
        assert ds.n_hours == 4
        np.testing.assert_array_equal(ds.target, [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(ds.day_ahead, [30.0, 31.0, 32.0, 33.0])
        assert ds.capacity == 100.0
        assert ds.start == T0

    def test_missing_column_rejected(self, tmp_path):
        cols = [["1"], ["30"], ["20"]]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal"],
                         hourly_rows(1, cols))
        with pytest.raises(SchemaError, match="schema mismatch"):
            load_csv(path, schema())

    def test_quarter_hourly_aggregation(self, tmp_path):
        rows = []
        for i in range(96):
            stamp = (T0 + timedelta(minutes=15 * i)).strftime("%Y-%m-%dT%H:%M:%SZ")
            hourly_cell = "5" if i % 4 == 0 else ""
            rows.append([stamp, hourly_cell and "1", hourly_cell and "30",
                         hourly_cell and "20", str(float(i))])
        path = write_csv(tmp_path / "q.csv", ["timestamp", "e", "da", "bal", "qf"], rows)
        ds = load_csv(path, schema(features=(("qf", "quarter_hourly"),)))
        assert ds.n_hours == 24
        np.testing.assert_allclose(ds.columns["qf"][0], np.mean([0, 1, 2, 3]))
        np.testing.assert_allclose(ds.columns["qf"][23], np.mean([92, 93, 94, 95]))

    def test_unparseable_value_reports_row(self, tmp_path):
        cols = [["1", "oops"], ["30", "31"], ["20", "21"], ["1", "2"]]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"],
                         hourly_rows(2, cols))
        with pytest.raises(CsvParseError, match="row 3") as err:
            load_csv(path, schema())
        assert err.value.row == 3

    def test_bad_timestamp_reports_row(self, tmp_path):
        rows = hourly_rows(2, [["1", "2"], ["30", "31"], ["20", "21"], ["1", "2"]])
        rows[1][0] = "2016-02-04 garbage"
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"], rows)
        with pytest.raises(CsvParseError, match="row 3"):
            load_csv(path, schema())

    def test_non_monotone_rejected(self, tmp_path):
        rows = hourly_rows(3, [["1"] * 3, ["30"] * 3, ["20"] * 3, ["1"] * 3])
        rows[2][0] = rows[0][0]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"], rows)
        with pytest.raises(OrderingError, match="ordering error"):
            load_csv(path, schema())

    def test_skipped_row_becomes_gap_then_filled(self, tmp_path):
        rows = hourly_rows(4, [["1", "2", "3", "4"], ["30"] * 4, ["20"] * 4, ["1"] * 4])
        del rows[1]  # hour 1 missing entirely
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"], rows)
        ds, stats = load_csv(path, schema(), with_stats=True)
        assert ds.n_hours == 4
        assert stats.skipped_stamps == 1
        assert ds.target[1] == pytest.approx(2.0)  # interpolated between 1 and 3

    def test_empty_cells_interpolated(self, tmp_path):
        cols = [["1", "", "3"], ["30", "30", "30"], ["20", "20", "20"], ["1", "1", "1"]]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"],
                         hourly_rows(3, cols))
        ds, stats = load_csv(path, schema(), with_stats=True)
        assert ds.target[1] == pytest.approx(2.0)
        assert stats.gaps["e"] == 1

    def test_target_clipped_with_warning(self, tmp_path, caplog):
        cols = [["1", "150", "-3"], ["30"] * 3, ["20"] * 3, ["1"] * 3]
        path = write_csv(tmp_path / "d.csv", ["timestamp", "e", "da", "bal", "bm"],
                         hourly_rows(3, cols))
        with caplog.at_level(logging.WARNING):
            ds, stats = load_csv(path, schema(), with_stats=True)
        np.testing.assert_array_equal(ds.target, [1.0, 100.0, 0.0])
        assert stats.clipped_target == 2
        assert any("clipped" in r.message for r in caplog.records)

    def test_round_trip_via_writer(self, tmp_path):
        ds = generate_synthetic(SyntheticConfig(n_hours=48, seed=3))
        path = tmp_path / "round.csv"
        write_dataset_csv(ds, path)
        back = load_csv(path, SyntheticConfig(n_hours=48, seed=3).schema())
        for name in ds.columns:
            np.testing.assert_array_equal(back.columns[name], ds.columns[name])


class TestSchemaFiles:
    def test_parse_round_trip(self, tmp_path):
        sch = schema(features=(("bm", "hourly"), ("qf", "quarter_hourly")))
        path = tmp_path / "s.txt"
        write_schema_file(sch, path)
        back = parse_schema_file(path)
        assert back == sch

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("target = e\nday_ahead = da\n")
        with pytest.raises(SchemaError, match="missing key"):
            parse_schema_file(path)

    def test_invalid_capacity_rejected(self):
        with pytest.raises(SchemaError, match="capacity"):
            schema(capacity=0.0)

    def test_no_features_rejected(self):
        with pytest.raises(SchemaError, match="feature"):
            DatasetSchema(target="e", day_ahead="da", balancing="bal",
                          features=(), capacity=10.0)


class TestSynthetic:
    def test_seed_determinism(self):
        a = generate_synthetic(SyntheticConfig(n_hours=200, seed=1))
        b = generate_synthetic(SyntheticConfig(n_hours=200, seed=1))
        for name in a.columns:
            np.testing.assert_array_equal(a.columns[name], b.columns[name])

    def test_seed_changes_output(self):
        a = generate_synthetic(SyntheticConfig(n_hours=50, seed=1))
        b = generate_synthetic(SyntheticConfig(n_hours=50, seed=2))
        assert not np.array_equal(a.target, b.target)

    def test_noise_free_identity(self):
        cfg = SyntheticConfig(n_hours=100, coefficients=(1.0,), noise_scale=0.0, seed=5)
        ds = generate_synthetic(cfg)
        np.testing.assert_array_equal(ds.target, ds.columns["f1"])
        np.testing.assert_array_equal(ds.columns["benchmark"], ds.target)

    def test_length_and_range(self):
        ds = generate_synthetic(SyntheticConfig(n_hours=24 * 30, seed=1))
        assert ds.n_hours == 720
        assert ds.target.min() >= 0.0 and ds.target.max() <= 100.0
        assert ds.columns["benchmark"].min() >= 0.0

    def test_costs_not_both_zero_and_asymmetry_works(self):
        ds = generate_synthetic(SyntheticConfig(n_hours=2000, seed=7, asymmetry=0.8))
        pm, pp = derive_settlement_arrays(ds.day_ahead, ds.balancing)
        assert (pm * pp == 0.0).all()
        assert (pm >= 0).all() and (pp >= 0).all()
        assert (pm + pp > 0).mean() > 0.95
        assert pp.mean() > 2.0 * pm.mean()  # asymmetry toward overproduction cost

    def test_zero_deviation_scale_gives_zero_costs(self):
        ds = generate_synthetic(SyntheticConfig(n_hours=50, seed=1, deviation_scale=0.0))
        pm, pp = derive_settlement_arrays(ds.day_ahead, ds.balancing)
        assert (pm == 0.0).all() and (pp == 0.0).all()

    def test_invalid_configs_rejected(self):
        with pytest.raises(SchemaError):
            SyntheticConfig(n_hours=0)
        with pytest.raises(SchemaError):
            SyntheticConfig(n_hours=5, asymmetry=1.5)
        with pytest.raises(SchemaError):
            SyntheticConfig(n_hours=5, noise_scale=-1.0)

    def test_config_file_parsing_and_overrides(self, tmp_path):
        path = tmp_path / "synth.txt"
        path.write_text(
            "# demo config\nn_hours = 48\ncoefficients = 0.6 0.4\nnoise_scale = 2.5\n"
            "capacity = 80\nseed = 9\nasymmetry = 0.7\n"
        )
        cfg = parse_synthetic_config(path)
        assert cfg.n_hours == 48 and cfg.seed == 9 and cfg.coefficients == (0.6, 0.4)
        cfg2 = parse_synthetic_config(path, seed=11, n_hours=24)
        assert cfg2.seed == 11 and cfg2.n_hours == 24

    def test_unknown_config_key_rejected(self, tmp_path):
        path = tmp_path / "synth.txt"
        path.write_text("n_hours = 5\nwhatever = 3\n")
        with pytest.raises(SchemaError, match="unknown"):
            parse_synthetic_config(path)
