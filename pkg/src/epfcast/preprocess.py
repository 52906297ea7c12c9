"""Min-max scaling, chronological splitting, and sliding-window datasets.

The scaler is fitted on training-partition rows only (fitting on all rows
would leak test statistics into the transform); constant features map to
0.0 and out-of-range test values are deliberately not clamped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRange, SeriesTooShort, TooFewRows, UnknownFeature
from .ingest import TimeSeriesFrame
from .ioutil import atomic_write_text

SCALER_FORMAT = "epfcast-scaler/1"


@dataclass(frozen=True)
class ScalerParams:
    feature_names: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if np.any(self.mins > self.maxs):
            raise ValueError("scaler min > max")

    def index(self, feature: str) -> int:
        try:
            return self.feature_names.index(feature)
        except ValueError:
            raise UnknownFeature(f"feature {feature!r} not covered by scaler") from None

    def transform_values(self, feature: str, values) -> np.ndarray:
        i = self.index(feature)
        lo, hi = self.mins[i], self.maxs[i]
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.zeros_like(values)
        return (values - lo) / (hi - lo)

    def invert_values(self, feature: str, values) -> np.ndarray:
        i = self.index(feature)
        lo, hi = self.mins[i], self.maxs[i]
        return np.asarray(values, dtype=np.float64) * (hi - lo) + lo


def fit_minmax(frame: TimeSeriesFrame, rows: range | None = None) -> ScalerParams:
    """Per-feature min/max over the given row range (default: all rows)."""
    if rows is None:
        rows = range(frame.n_rows)
    if len(rows) == 0:
        raise EmptyRange("cannot fit a scaler on an empty row range")
    sub = frame.to_matrix()[rows.start : rows.stop : rows.step]
    if not np.isfinite(sub).all():
        raise ValueError("scaler fitting requires no missing values")
    return ScalerParams(
        feature_names=frame.feature_names,
        mins=sub.min(axis=0),
        maxs=sub.max(axis=0),
    )


def apply_minmax(frame: TimeSeriesFrame, params: ScalerParams) -> TimeSeriesFrame:
    """x' = (x - min) / (max - min); constant features map to 0.0.

    Rows outside the fitted range scale beyond [0, 1]; no clamping, spikes
    must survive the transform.
    """
    scaled = {
        name: params.transform_values(name, frame.column(name))
        for name in frame.feature_names
    }
    return TimeSeriesFrame(frame.dates, scaled)


def invert_minmax(values, params: ScalerParams, feature: str) -> np.ndarray:
    """Exact inverse of apply_minmax for one feature: x = x'(max-min) + min."""
    return params.invert_values(feature, values)


def save_scaler(params: ScalerParams, path) -> None:
    doc = {
        "format": SCALER_FORMAT,
        "features": {
            name: {"min": float(params.mins[i]), "max": float(params.maxs[i])}
            for i, name in enumerate(params.feature_names)
        },
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def load_scaler(path) -> ScalerParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != SCALER_FORMAT:
        raise ValueError(f"unsupported scaler format: {doc.get('format')!r}")
    names = tuple(doc["features"])
    return ScalerParams(
        feature_names=names,
        mins=np.array([doc["features"][n]["min"] for n in names]),
        maxs=np.array([doc["features"][n]["max"] for n in names]),
    )


# --- splitting ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")

    def train_end_index(self, n_rows: int) -> int:
        # floor(N * fraction), clamped so both partitions stay non-empty
        return min(max(int(math.floor(n_rows * self.train_fraction)), 1), n_rows - 1)


def chrono_split(frame: TimeSeriesFrame, spec: SplitSpec = SplitSpec()):
    """Split into (train, test) at floor(N * fraction); no shuffling."""
    if frame.n_rows < 2:
        raise TooFewRows(f"cannot split {frame.n_rows} row(s)")
    cut = spec.train_end_index(frame.n_rows)
    return frame.slice_rows(0, cut), frame.slice_rows(cut, frame.n_rows)


# --- supervised windows ---------------------------------------------------------

@dataclass(frozen=True)
class WindowedDataset:
    """Causal supervised pairs: inputs (n, window, F), targets (n, horizon).

    Sample i covers source rows [i, i+window) as inputs and rows
    [i+window, i+window+horizon) of the target feature as targets.
    ``sample_dates`` holds the date of each sample's first target row.
    """

    inputs: np.ndarray
    targets: np.ndarray
    window: int
    horizon: int
    target_feature: str
    feature_names: tuple
    sample_dates: tuple = field(default=())

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs/targets sample counts differ")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    def slice(self, start: int, stop: int) -> "WindowedDataset":
        return WindowedDataset(
            inputs=self.inputs[start:stop],
            targets=self.targets[start:stop],
            window=self.window,
            horizon=self.horizon,
            target_feature=self.target_feature,
            feature_names=self.feature_names,
            sample_dates=self.sample_dates[start:stop],
        )


def make_windows(
    frame: TimeSeriesFrame,
    window: int,
    horizon: int = 1,
    target_feature: str = "rrp",
) -> WindowedDataset:
    """Slide a causal window over the frame; no sample straddles missing data.

    Raises SeriesTooShort when N < window + horizon.
    """
    if window < 1 or horizon < 1:
        raise ValueError("window and horizon must be >= 1")
    n = frame.n_rows
    if n < window + horizon:
        raise SeriesTooShort(f"N={n} < window+horizon={window + horizon}")
    if target_feature not in frame.feature_names:
        raise UnknownFeature(f"target feature {target_feature!r} not in frame")

    matrix = frame.to_matrix()
    if not np.isfinite(matrix).all():
        raise ValueError("windowing requires no missing values")
    target = frame.column(target_feature)

    n_samples = n - window - horizon + 1
    input_view = np.lib.stride_tricks.sliding_window_view(matrix, window, axis=0)
    inputs = input_view[:n_samples].transpose(0, 2, 1).copy()  # (n, window, F)
    target_view = np.lib.stride_tricks.sliding_window_view(target, horizon)
    targets = target_view[window : window + n_samples].copy()

    return WindowedDataset(
        inputs=inputs,
        targets=targets,
        window=window,
        horizon=horizon,
        target_feature=target_feature,
        feature_names=frame.feature_names,
        sample_dates=tuple(frame.dates[window : window + n_samples]),
    )
