"""Recursive multi-step forecasting and monthly aggregation.

The forecaster walks one day at a time: predict the next scaled price,
synthesize the next row (prediction in the target slot, seasonal-naive
projections everywhere else), slide the window, repeat. Exogenous
features for a future date are taken from the same calendar date one
year earlier, which becomes self-referential past the first projected
year; calendar-derived features are recomputed from the date itself.
Daily output can be aggregated to calendar months for long-horizon
views.
"""

from __future__ import annotations

import calendar as _calendar
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyResult,
    HistoryTooShort,
    NonFiniteActivation,
    NonFinitePrediction,
)
from .ingest import CALENDAR_FEATURES, TimeSeriesFrame, calendar_row
from .ioutil import atomic_write_text
from .preprocess import ScalerParams

FORECAST_FORMAT = "epfcast-forecast/1"


@dataclass(frozen=True)
class ForecastResult:
    """Forecast series at daily or monthly resolution.

    For monthly results each date is the first covered day of its month
    and partial_month flags months not fully covered by the daily span.
    """

    dates: Tuple[date, ...]
    rrp_forecast: np.ndarray
    horizon_steps: int
    resolution: str
    partial_month: Tuple[bool, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.rrp_forecast, dtype=np.float64)
        object.__setattr__(self, "rrp_forecast", values)
        if self.resolution not in ("daily", "monthly"):
            raise ValueError(f"unknown resolution {self.resolution!r}")
        if len(self.dates) != self.horizon_steps or values.size != self.horizon_steps:
            raise ValueError("dates/values length must equal horizon_steps")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise ValueError(f"forecast dates not increasing: {a} then {b}")
            if self.resolution == "daily" and (b - a).days != 1:
                raise ValueError(f"daily forecast has a gap: {a} then {b}")
            if self.resolution == "monthly":
                if (b.year * 12 + b.month) - (a.year * 12 + a.month) != 1:
                    raise ValueError(f"monthly forecast skips a month: {a} then {b}")
        if self.resolution == "monthly" and len(self.partial_month) != self.horizon_steps:
            raise ValueError("monthly results need one partial_month flag per row")


def _one_year_earlier(d: date) -> date:
    if d.month == 2 and d.day == 29:
        try:
            return date(d.year - 1, 2, 29)
        except ValueError:
            return date(d.year - 1, 2, 28)
    return date(d.year - 1, d.month, d.day)


def project_exogenous(
    frame: TimeSeriesFrame,
    future_dates: Sequence[date],
    exclude: Tuple[str, ...] = ("rrp",),
) -> Dict[str, np.ndarray]:
    """Seasonal-naive projection of every feature except ``exclude``.

    Each future date takes its value from the same calendar date one year
    earlier, from the observed frame when available, otherwise from an
    already-projected future date (so projections beyond one year reuse
    earlier projections). Calendar-derived columns (month_sin, month_cos,
    weekend) are computed exactly from the future date instead; note they
    come out in raw convention regardless of how the frame is scaled.

    Raises HistoryTooShort when the frame spans fewer than 366 days or a
    lookback date is missing from it.
    """
    if frame.n_rows == 0 or (frame.dates[-1] - frame.dates[0]).days + 1 < 366:
        raise HistoryTooShort(
            "seasonal projection needs at least 366 days of history"
        )
    future_dates = list(future_dates)
    for a, b in zip(future_dates, future_dates[1:]):
        if b <= a:
            raise ValueError("future dates must be strictly increasing")
    names = [n for n in frame.feature_names if n not in exclude]
    copy_names = [n for n in names if n not in CALENDAR_FEATURES]
    observed_index = {d: i for i, d in enumerate(frame.dates)}
    columns = {n: frame.column(n) for n in copy_names}
    projected: Dict[str, Dict[date, float]] = {n: {} for n in copy_names}
    out = {n: np.empty(len(future_dates), dtype=np.float64) for n in names}
    for j, d in enumerate(future_dates):
        source = _one_year_earlier(d)
        row_idx = observed_index.get(source)
        for n in copy_names:
            if row_idx is not None:
                value = columns[n][row_idx]
            elif source in projected[n]:
                value = projected[n][source]
            else:
                raise HistoryTooShort(
                    f"no value for {n} at lookback date {source} "
                    f"(needed for {d}); history may have gaps"
                )
            out[n][j] = value
            projected[n][d] = value
        cal = calendar_row(d)
        for n in names:
            if n in CALENDAR_FEATURES:
                out[n][j] = cal[n]
    return out


class PersistenceModel:
    """Stub forecaster: always predicts the window's last target value."""

    def __init__(self, target_index: int):
        self.target_index = int(target_index)

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x[:, -1, self.target_index:self.target_index + 1]


def recursive_forecast(
    model,
    frame: TimeSeriesFrame,
    scaler: ScalerParams,
    window: int,
    horizon_steps: int,
    target_feature: str = "rrp",
) -> ForecastResult:
    """Iterated one-step forecast for ``horizon_steps`` days past the frame.

    ``frame`` must already be scaled with ``scaler`` (the model consumes
    scaled windows); the returned forecast is inverse-scaled to price
    units. The model only needs a ``predict`` method over batches shaped
    (1, window, n_features).
    """
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    if frame.n_rows < window:
        raise HistoryTooShort(
            f"need at least window={window} rows, frame has {frame.n_rows}"
        )
    names = frame.feature_names
    ti = names.index(target_feature) if target_feature in names else -1
    if ti < 0:
        raise HistoryTooShort(f"frame lacks the target feature {target_feature!r}")
    last = frame.dates[-1]
    future_dates = [last + timedelta(days=k + 1) for k in range(horizon_steps)]

    projected = project_exogenous(frame, future_dates, exclude=(target_feature,))
    for n in CALENDAR_FEATURES:
        if n in projected:
            projected[n] = scaler.transform_values(n, projected[n])

    history = frame.to_matrix(names)
    buf = np.empty((frame.n_rows + horizon_steps, len(names)), dtype=np.float64)
    buf[:frame.n_rows] = history
    pos = frame.n_rows
    preds_scaled = np.empty(horizon_steps, dtype=np.float64)
    for step in range(horizon_steps):
        x = buf[pos - window:pos][None, :, :]
        try:
            y = model.predict(x)
        except NonFiniteActivation as exc:
            raise NonFinitePrediction(step, str(exc)) from exc
        yhat = float(np.asarray(y).ravel()[0])
        if not math.isfinite(yhat):
            raise NonFinitePrediction(step, f"model produced {yhat}")
        preds_scaled[step] = yhat
        for col, n in enumerate(names):
            if col == ti:
                buf[pos, col] = yhat
            else:
                buf[pos, col] = projected[n][step]
        pos += 1

    prices = scaler.invert_values(target_feature, preds_scaled)
    return ForecastResult(
        dates=tuple(future_dates),
        rrp_forecast=prices,
        horizon_steps=horizon_steps,
        resolution="daily",
    )


def aggregate_monthly(result: ForecastResult) -> ForecastResult:
    """Mean of the daily forecasts per calendar month.

    Months not fully covered by the daily span (head or tail) are kept
    and flagged as partial.
    """
    if result.resolution != "daily":
        raise ValueError("aggregate_monthly expects a daily forecast")
    if result.horizon_steps == 0:
        raise EmptyResult("nothing to aggregate")
    month_dates: List[date] = []
    month_values: List[float] = []
    partial: List[bool] = []
    span_start = 0
    days = result.dates
    values = result.rrp_forecast
    for i in range(1, len(days) + 1):
        if i == len(days) or (days[i].year, days[i].month) != (days[span_start].year,
                                                               days[span_start].month):
            block = values[span_start:i]
            first = days[span_start]
            month_dates.append(first)
            month_values.append(float(np.mean(block)))
            n_in_month = _calendar.monthrange(first.year, first.month)[1]
            partial.append(block.size != n_in_month)
            span_start = i
    return ForecastResult(
        dates=tuple(month_dates),
        rrp_forecast=np.array(month_values),
        horizon_steps=len(month_dates),
        resolution="monthly",
        partial_month=tuple(partial),
    )


def forecast_to_csv(result: ForecastResult) -> str:
    """Plot-ready CSV: date, rrp_forecast, resolution, partial_month."""
    lines = ["date,rrp_forecast,resolution,partial_month"]
    for i, d in enumerate(result.dates):
        flag = ""
        if result.resolution == "monthly":
            flag = "true" if result.partial_month[i] else "false"
        value = repr(float(result.rrp_forecast[i]))
        lines.append(f"{d.isoformat()},{value},{result.resolution},{flag}")
    return "\n".join(lines) + "\n"


def forecast_to_json(result: ForecastResult) -> str:
    doc = {
        "format": FORECAST_FORMAT,
        "resolution": result.resolution,
        "horizon_steps": result.horizon_steps,
        "dates": [d.isoformat() for d in result.dates],
        "rrp_forecast": [float(v) for v in result.rrp_forecast],
        "partial_month": list(result.partial_month),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def save_forecast(result: ForecastResult, csv_path, json_path=None) -> None:
    atomic_write_text(csv_path, forecast_to_csv(result))
    if json_path is not None:
        atomic_write_text(json_path, forecast_to_json(result))
