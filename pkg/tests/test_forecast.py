"""Recursive forecasting, exogenous projection, monthly aggregation."""

import json
from datetime import date, timedelta

import numpy as np
import numpy.testing as npt
import pytest

from epfcast.errors import EmptyResult, HistoryTooShort, NonFinitePrediction
from epfcast.forecast import (
    ForecastResult,
    PersistenceModel,
    aggregate_monthly,
    forecast_to_csv,
    forecast_to_json,
    project_exogenous,
    recursive_forecast,
    save_forecast,
)
from epfcast.ingest import TimeSeriesFrame, add_seasonal_features, calendar_row
from epfcast.preprocess import apply_minmax, fit_minmax


def _history(n_days, start=date(2019, 1, 1), seed=0, with_calendar=True):
    rng = np.random.default_rng(seed)
    dates = [start + timedelta(days=i) for i in range(n_days)]
    frame = TimeSeriesFrame(
        dates,
        {
            "demand": rng.uniform(3000.0, 5000.0, n_days),
            "rrp": rng.uniform(20.0, 200.0, n_days),
        },
    )
    return add_seasonal_features(frame) if with_calendar else frame


def _scaled(frame):
    scaler = fit_minmax(frame)
    return apply_minmax(frame, scaler), scaler


class TestProjectExogenous:
    def test_year_earlier_copy(self):
        frame = _history(500, with_calendar=False)
        futures = [frame.dates[-1] + timedelta(days=k + 1) for k in range(10)]
        out = project_exogenous(frame, futures, exclude=("rrp",))
        assert set(out) == {"demand"}
        idx = {d: i for i, d in enumerate(frame.dates)}
        for j, d in enumerate(futures):
            src = date(d.year - 1, d.month, d.day)
            assert out["demand"][j] == frame.column("demand")[idx[src]]

    def test_history_under_one_year_refused(self):
        frame = _history(365)
        with pytest.raises(HistoryTooShort):
            project_exogenous(frame, [frame.dates[-1] + timedelta(days=1)])

    def test_projection_reuses_projected_values_beyond_one_year(self):
        frame = _history(400, with_calendar=False)
        futures = [frame.dates[-1] + timedelta(days=k + 1) for k in range(800)]
        out = project_exogenous(frame, futures, exclude=("rrp",))
        lookup = dict(zip(futures, out["demand"]))
        far = futures[780]
        src = date(far.year - 1, far.month, far.day)
        assert src in lookup  # the source itself was projected
        assert lookup[far] == lookup[src]

    def test_leap_day_falls_back_to_feb_28(self):
        # future 2021-02-28..03-01 looks back into a leap February
        start = date(2019, 6, 1)
        n = (date(2021, 2, 27) - start).days + 1
        frame = _history(n, start=start, with_calendar=False)
        futures = [date(2021, 2, 28), date(2021, 3, 1)]
        out = project_exogenous(frame, futures, exclude=("rrp",))
        idx = {d: i for i, d in enumerate(frame.dates)}
        assert out["demand"][0] == frame.column("demand")[idx[date(2020, 2, 28)]]

        # and a future Feb 29 itself resolves against Feb 28 of a common year
        start2 = date(2022, 6, 1)
        n2 = (date(2024, 2, 28) - start2).days + 1
        frame2 = _history(n2, start=start2, with_calendar=False)
        out2 = project_exogenous(frame2, [date(2024, 2, 29)], exclude=("rrp",))
        idx2 = {d: i for i, d in enumerate(frame2.dates)}
        assert out2["demand"][0] == frame2.column("demand")[idx2[date(2023, 2, 28)]]

    def test_calendar_features_computed_not_copied(self):
        frame = _history(500)
        futures = [frame.dates[-1] + timedelta(days=k + 1) for k in range(5)]
        out = project_exogenous(frame, futures, exclude=("rrp",))
        for j, d in enumerate(futures):
            row = calendar_row(d)
            assert out["month_sin"][j] == row["month_sin"]
            assert out["weekend"][j] == row["weekend"]

    def test_unsorted_future_dates_rejected(self):
        frame = _history(500)
        with pytest.raises(ValueError):
            project_exogenous(
                frame, [frame.dates[-1] + timedelta(days=2), frame.dates[-1]]
            )


class TestRecursiveForecast:
    def test_persistence_stub_is_exactly_constant(self):
        frame = _history(600)
        scaled, scaler = _scaled(frame)
        model = PersistenceModel(scaled.feature_names.index("rrp"))
        result = recursive_forecast(model, scaled, scaler, window=14, horizon_steps=90)
        assert np.all(result.rrp_forecast == result.rrp_forecast[0])
        # the held value is the last observed price, up to scaling roundtrip
        assert result.rrp_forecast[0] == pytest.approx(
            frame.column("rrp")[-1], abs=1e-9
        )

    def test_dates_continue_the_series(self):
        frame = _history(600)
        scaled, scaler = _scaled(frame)
        model = PersistenceModel(scaled.feature_names.index("rrp"))
        result = recursive_forecast(model, scaled, scaler, window=7, horizon_steps=30)
        assert result.resolution == "daily"
        assert result.horizon_steps == 30
        assert result.dates[0] == frame.dates[-1] + timedelta(days=1)
        assert result.dates[-1] == frame.dates[-1] + timedelta(days=30)

    def test_prefix_stability_across_horizons(self):
        # the first k steps do not depend on how far the recursion continues
        frame = _history(600)
        scaled, scaler = _scaled(frame)
        model = PersistenceModel(scaled.feature_names.index("rrp"))
        long = recursive_forecast(model, scaled, scaler, window=14, horizon_steps=120)
        for k in (1, 10, 100):
            short = recursive_forecast(model, scaled, scaler, window=14, horizon_steps=k)
            npt.assert_array_equal(short.rrp_forecast, long.rrp_forecast[:k])

    def test_nonfinite_prediction_reports_step(self):
        frame = _history(600)
        scaled, scaler = _scaled(frame)

        class Bad:
            def predict(self, x, batch_size=256):
                return np.array([[np.nan]])

        with pytest.raises(NonFinitePrediction) as info:
            recursive_forecast(Bad(), scaled, scaler, window=7, horizon_steps=5)
        assert info.value.step == 0

    def test_window_longer_than_history_refused(self):
        frame = _history(400)
        scaled, scaler = _scaled(frame)
        model = PersistenceModel(0)
        with pytest.raises(HistoryTooShort):
            recursive_forecast(model, scaled, scaler, window=401, horizon_steps=3)

    def test_missing_target_feature(self):
        frame = _history(500)
        scaled, scaler = _scaled(frame)
        with pytest.raises(HistoryTooShort):
            recursive_forecast(
                PersistenceModel(0), scaled, scaler, window=7,
                horizon_steps=2, target_feature="price",
            )


class TestAggregateMonthly:
    def _daily(self, start, n, values=None):
        dates = tuple(start + timedelta(days=i) for i in range(n))
        vals = np.arange(1.0, n + 1.0) if values is None else np.asarray(values, float)
        return ForecastResult(
            dates=dates, rrp_forecast=vals, horizon_steps=n, resolution="daily"
        )

    def test_full_quarter(self):
        n = (date(2021, 3, 31) - date(2021, 1, 1)).days + 1
        monthly = aggregate_monthly(self._daily(date(2021, 1, 1), n))
        assert monthly.horizon_steps == 3
        assert monthly.dates == (date(2021, 1, 1), date(2021, 2, 1), date(2021, 3, 1))
        assert monthly.partial_month == (False, False, False)
        # January gets days 1..31: mean 16
        assert monthly.rrp_forecast[0] == pytest.approx(16.0, abs=1e-12)

    def test_partial_head_and_tail_flagged(self):
        start = date(2021, 1, 20)
        n = (date(2021, 3, 10) - start).days + 1
        monthly = aggregate_monthly(self._daily(start, n))
        assert monthly.partial_month == (True, False, True)
        assert monthly.dates[0] == date(2021, 1, 20)  # first covered day
        assert monthly.dates[1] == date(2021, 2, 1)

    def test_leap_february_counts_29_days(self):
        n = (date(2020, 3, 31) - date(2020, 2, 1)).days + 1
        monthly = aggregate_monthly(self._daily(date(2020, 2, 1), n))
        assert monthly.partial_month == (False, False)

    def test_monthly_input_rejected(self):
        n = (date(2021, 3, 31) - date(2021, 1, 1)).days + 1
        monthly = aggregate_monthly(self._daily(date(2021, 1, 1), n))
        with pytest.raises(ValueError):
            aggregate_monthly(monthly)

    def test_six_calendar_years_make_72_rows(self):
        start = date(2021, 1, 1)
        n = (date(2026, 12, 31) - start).days + 1
        monthly = aggregate_monthly(self._daily(start, n))
        assert monthly.horizon_steps == 72
        assert not any(monthly.partial_month)


class TestResultValidation:
    def test_daily_gap_rejected(self):
        with pytest.raises(ValueError):
            ForecastResult(
                dates=(date(2021, 1, 1), date(2021, 1, 3)),
                rrp_forecast=np.array([1.0, 2.0]),
                horizon_steps=2,
                resolution="daily",
            )

    def test_monthly_skip_rejected(self):
        with pytest.raises(ValueError):
            ForecastResult(
                dates=(date(2021, 1, 1), date(2021, 3, 1)),
                rrp_forecast=np.array([1.0, 2.0]),
                horizon_steps=2,
                resolution="monthly",
                partial_month=(False, False),
            )

    def test_monthly_needs_flags(self):
        with pytest.raises(ValueError):
            ForecastResult(
                dates=(date(2021, 1, 1),),
                rrp_forecast=np.array([1.0]),
                horizon_steps=1,
                resolution="monthly",
            )

    def test_unknown_resolution(self):
        with pytest.raises(ValueError):
            ForecastResult(
                dates=(date(2021, 1, 1),),
                rrp_forecast=np.array([1.0]),
                horizon_steps=1,
                resolution="weekly",
            )


class TestSerialization:
    def _result(self):
        return ForecastResult(
            dates=(date(2021, 1, 1), date(2021, 1, 2)),
            rrp_forecast=np.array([133.25, 1.0 / 3.0]),
            horizon_steps=2,
            resolution="daily",
        )

    def test_csv_layout_and_precision(self):
        lines = forecast_to_csv(self._result()).splitlines()
        assert lines[0] == "date,rrp_forecast,resolution,partial_month"
        assert lines[1] == "2021-01-01,133.25,daily,"
        assert lines[2] == f"2021-01-02,{1.0 / 3.0!r},daily,"
        assert "np.float64" not in lines[2]

    def test_monthly_csv_carries_flags(self):
        monthly = ForecastResult(
            dates=(date(2021, 1, 5),),
            rrp_forecast=np.array([50.0]),
            horizon_steps=1,
            resolution="monthly",
            partial_month=(True,),
        )
        assert forecast_to_csv(monthly).splitlines()[1].endswith(",monthly,true")

    def test_json_document(self):
        doc = json.loads(forecast_to_json(self._result()))
        assert doc["format"] == "epfcast-forecast/1"
        assert doc["dates"] == ["2021-01-01", "2021-01-02"]
        assert doc["resolution"] == "daily"

    def test_save_writes_both_files(self, tmp_path):
        csv_path = tmp_path / "daily.csv"
        json_path = tmp_path / "daily.json"
        save_forecast(self._result(), csv_path, json_path)
        assert csv_path.read_text() == forecast_to_csv(self._result())
        assert json.loads(json_path.read_text())["horizon_steps"] == 2
