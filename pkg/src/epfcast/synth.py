"""Seeded synthetic market data with the full daily schema.

Substitutes for the real (unredistributable) dataset in tests and demos.
The price is constructed as base + annual harmonic + weekly harmonic +
alpha * demand + noise with alpha > 0, so demand and price are positively
correlated by construction; a small fraction of days receive spike prices
to exercise the rare-positive classification metrics.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .ingest import CANONICAL_FEATURES, TimeSeriesFrame

# price construction constants ($/MWh)
PRICE_BASE = 38.0
PRICE_ANNUAL_AMP = 5.0
PRICE_WEEKLY_AMP = 7.0
PRICE_DEMAND_ALPHA = 0.022  # $/MWh per MWh of demand
PRICE_NOISE_STD = 4.0

DEMAND_BASE = 4200.0
DEMAND_ANNUAL_AMP = 550.0
DEMAND_WEEKEND_DROP = 320.0
DEMAND_NOISE_STD = 180.0

FIXED_HOLIDAYS = ((1, 1), (12, 25), (12, 26))


def synth_series(
    n_days: int,
    seed: int,
    start: date = date(2015, 1, 1),
    spike_fraction: float = 0.02,
    spike_factor: float = 2.5,
) -> TimeSeriesFrame:
    """Deterministic synthetic frame of ``n_days`` consecutive days."""
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    rng = np.random.default_rng(seed)

    dates = [start + timedelta(days=i) for i in range(n_days)]
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=np.float64)
    dow = np.array([d.weekday() for d in dates], dtype=np.float64)
    annual = 2.0 * np.pi * (doy - 1.0) / 365.25
    weekly = 2.0 * np.pi * dow / 7.0

    weekend = dow >= 5
    demand = (
        DEMAND_BASE
        + DEMAND_ANNUAL_AMP * np.cos(annual)  # winter peak in the south
        - DEMAND_WEEKEND_DROP * weekend
        + rng.normal(0.0, DEMAND_NOISE_STD, n_days)
    )

    rrp = (
        PRICE_BASE
        + PRICE_ANNUAL_AMP * np.sin(annual)
        + PRICE_WEEKLY_AMP * np.sin(weekly)
        + PRICE_DEMAND_ALPHA * demand
        + rng.normal(0.0, PRICE_NOISE_STD, n_days)
    )
    spikes = rng.random(n_days) < spike_fraction
    rrp = np.where(spikes, rrp * spike_factor, rrp)

    max_temp = 22.0 + 8.0 * np.sin(annual) + rng.normal(0.0, 2.0, n_days)
    min_temp = max_temp - 6.0 - np.abs(rng.normal(0.0, 2.5, n_days))
    solar = np.maximum(0.0, 17.0 + 8.0 * np.sin(annual) + rng.normal(0.0, 3.0, n_days))
    rain = np.where(rng.random(n_days) < 0.6, 0.0, rng.exponential(3.0, n_days))

    month_day = [(d.month, d.day) for d in dates]
    holiday = np.array(
        [1.0 if md in FIXED_HOLIDAYS else 0.0 for md in month_day], dtype=np.float64
    )
    holiday = np.maximum(holiday, (rng.random(n_days) < 0.01).astype(np.float64))
    school_break = rng.random(n_days) < 0.10
    school_day = ((~weekend) & (holiday == 0.0) & (~school_break)).astype(np.float64)

    features = {
        "demand": demand,
        "rrp": rrp,
        "solar_exposure": solar,
        "max_temp": max_temp,
        "min_temp": min_temp,
        "rainfall": rain,
        "rrp_positive": np.maximum(rrp, 0.0),
        "rrp_negative": np.minimum(rrp, 0.0),
        "holiday": holiday,
        "school_day": school_day,
    }
    assert tuple(features) == CANONICAL_FEATURES
    return TimeSeriesFrame(dates, features)
