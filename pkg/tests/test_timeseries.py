"""Series construction, gap filling, aggregation, alignment."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from windbid.errors import SeriesError
from windbid.timeseries import (
    HourlySeries,
    MarketDataset,
    QuarterHourSeries,
    aggregate_to_hourly,
    align,
    fill_gaps,
)

T0 = datetime(2016, 2, 4, tzinfo=timezone.utc)
NAN = float("nan")


def hourly(values, name="s", start=T0):
    return HourlySeries(name=name, start=start, values=np.array(values, dtype=float))


class TestSeriesTypes:
    def test_requires_utc(self):
        with pytest.raises(SeriesError):
            HourlySeries(name="s", start=datetime(2016, 2, 4), values=np.zeros(2))

    def test_requires_hour_boundary(self):
        with pytest.raises(SeriesError):
            HourlySeries(
                name="s",
                start=datetime(2016, 2, 4, 0, 30, tzinfo=timezone.utc),
                values=np.zeros(2),
            )

    def test_quarter_hour_boundary_ok(self):
        s = QuarterHourSeries(
            name="q",
            start=datetime(2016, 2, 4, 0, 45, tzinfo=timezone.utc),
            values=np.zeros(4),
        )
        assert s.timestamp(1).minute == 0

    def test_values_frozen(self):
        s = hourly([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 9.0

    def test_end_and_timestamps(self):
        s = hourly([1.0, 2.0, 3.0])
        assert s.end == T0 + timedelta(hours=3)
        assert s.timestamp(2) == T0 + timedelta(hours=2)


class TestFillGaps:
    def test_midpoint_interpolation(self):
        out = fill_gaps(hourly([1.0, NAN, 3.0]))
        np.testing.assert_array_equal(out.values, [1.0, 2.0, 3.0])

    def test_constant_edge_extension(self):
        out = fill_gaps(hourly([NAN, 5.0, NAN]))
        np.testing.assert_array_equal(out.values, [5.0, 5.0, 5.0])

    def test_equally_spaced_run(self):
        out = fill_gaps(hourly([2.0, NAN, NAN, 8.0]))
        np.testing.assert_array_equal(out.values, [2.0, 4.0, 6.0, 8.0])

    def test_all_missing_rejected(self):
        with pytest.raises(SeriesError, match="empty series"):
            fill_gaps(hourly([NAN, NAN]))

    def test_idempotent_and_preserves_observed(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            values = rng.uniform(0, 10, size=24)
            mask = rng.random(24) < 0.4
            if mask.all():
                mask[rng.integers(24)] = False
            values[mask] = NAN
            once = fill_gaps(hourly(values))
            twice = fill_gaps(once)
            np.testing.assert_array_equal(once.values, twice.values)
            observed = ~np.isnan(values)
            np.testing.assert_array_equal(once.values[observed], values[observed])
            assert not np.isnan(once.values).any()

    def test_complete_series_unchanged(self):
        s = hourly([1.0, 2.0])
        assert fill_gaps(s) is s


class TestAggregateToHourly:
    def quarter(self, values, start=T0):
        return QuarterHourSeries(name="q", start=start, values=np.array(values, dtype=float))

    def test_mean_of_four(self):
        out = aggregate_to_hourly(self.quarter([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_array_equal(out.values, [2.5])

    def test_constant(self):
        out = aggregate_to_hourly(self.quarter([7.0] * 8))
        np.testing.assert_array_equal(out.values, [7.0, 7.0])

    def test_missing_quarters_ignored(self):
        out = aggregate_to_hourly(self.quarter([1.0, NAN, 3.0, NAN]))
        np.testing.assert_array_equal(out.values, [2.0])

    def test_all_missing_hour_stays_missing(self):
        out = aggregate_to_hourly(self.quarter([NAN, NAN, NAN, NAN, 1.0, 1.0, 1.0, 1.0]))
        assert np.isnan(out.values[0]) and out.values[1] == 1.0

    def test_misaligned_start_rejected(self):
        q = self.quarter([1.0] * 4, start=T0 + timedelta(minutes=15))
        with pytest.raises(SeriesError, match="alignment"):
            aggregate_to_hourly(q)

    def test_partial_hour_rejected(self):
        with pytest.raises(SeriesError, match="alignment"):
            aggregate_to_hourly(self.quarter([1.0] * 5))


class TestAlign:
    def test_trims_to_overlap(self):
        a = hourly(np.arange(11.0), name="a", start=T0)
        b = hourly(np.arange(11.0), name="b", start=T0 + timedelta(hours=5))
        ds = align([a, b])
        assert ds.start == T0 + timedelta(hours=5)
        assert ds.n_hours == 6
        np.testing.assert_array_equal(ds.columns["a"], np.arange(5.0, 11.0))
        np.testing.assert_array_equal(ds.columns["b"], np.arange(6.0))

    def test_identical_ranges_unchanged(self):
        a = hourly([1.0, 2.0], name="a")
        b = hourly([3.0, 4.0], name="b")
        ds = align([a, b])
        assert ds.n_hours == 2
        np.testing.assert_array_equal(ds.columns["a"], [1.0, 2.0])

    def test_disjoint_ranges_rejected(self):
        a = hourly([1.0, 2.0], name="a", start=T0)
        b = hourly([1.0, 2.0], name="b", start=T0 + timedelta(hours=10))
        with pytest.raises(SeriesError, match="no overlap"):
            align([a, b])

    def test_values_traceable_to_inputs(self):
        rng = np.random.default_rng(1)
        series = [
            hourly(rng.uniform(size=30), name=f"s{i}", start=T0 + timedelta(hours=i))
            for i in range(3)
        ]
        ds = align(series)
        for s in series:
            for i in range(ds.n_hours):
                src = int((ds.timestamp(i) - s.start) / timedelta(hours=1))
                assert ds.columns[s.name][i] == s.values[src]

    def test_gappy_series_rejected(self):
        with pytest.raises(SeriesError, match="missing"):
            align([hourly([1.0, NAN])])

    def test_quarter_hour_series_rejected(self):
        q = QuarterHourSeries(name="q", start=T0, values=np.zeros(4))
        with pytest.raises(SeriesError, match="hourly"):
            align([q])


class TestMarketDataset:
    def test_role_accessors(self):
        ds = MarketDataset(
            start=T0,
            columns={"e": np.ones(2), "da": np.ones(2), "bal": np.ones(2), "f": np.ones(2)},
            capacity=10.0,
            target_name="e",
            day_ahead_name="da",
            balancing_name="bal",
        )
        np.testing.assert_array_equal(ds.target, [1.0, 1.0])
        assert ds.feature_names() == ["f"]

    def test_missing_role_rejected(self):
        ds = MarketDataset(start=T0, columns={"e": np.ones(2)})
        with pytest.raises(SeriesError):
            _ = ds.target

    def test_unequal_lengths_rejected(self):
        with pytest.raises(SeriesError):
            MarketDataset(start=T0, columns={"a": np.ones(2), "b": np.ones(3)})

    def test_replace_column(self):
        ds = MarketDataset(start=T0, columns={"a": np.ones(2)})
        swapped = ds.replace_column("a", np.zeros(2))
        np.testing.assert_array_equal(swapped.columns["a"], [0.0, 0.0])
        np.testing.assert_array_equal(ds.columns["a"], [1.0, 1.0])
