"""Load, validate, clean, and enrich daily electricity-market data.

The central type is :class:`TimeSeriesFrame`: a date-indexed set of named
float64 columns where missing values are NaN. Frames are immutable after
construction (arrays are marked read-only) and safe to share between tasks.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime

import numpy as np

from .errors import (
    AllMissingColumn,
    DuplicateDate,
    EmptyFile,
    MissingColumn,
    TooFewRows,
)

MISSING = float("nan")

#: canonical feature order for the daily market schema
CANONICAL_FEATURES = (
    "demand",
    "rrp",
    "solar_exposure",
    "max_temp",
    "min_temp",
    "rainfall",
    "rrp_positive",
    "rrp_negative",
    "holiday",
    "school_day",
)

BOOL_FEATURES = frozenset({"holiday", "school_day"})

CALENDAR_FEATURES = ("month_sin", "month_cos", "weekend")

_TRUE_TOKENS = frozenset({"y", "yes", "true", "t", "1", "1.0"})
_FALSE_TOKENS = frozenset({"n", "no", "false", "f", "0", "0.0"})


@dataclass(frozen=True)
class CsvSchema:
    """Maps canonical column names to CSV header names.

    ``columns`` maps canonical -> header; only ``required`` columns must be
    present in the file. ``date_format`` is "iso" (YYYY-MM-DD) or "dmy"
    (DD/MM/YYYY).
    """

    columns: dict = field(
        default_factory=lambda: {"date": "date", **{n: n for n in CANONICAL_FEATURES}}
    )
    required: tuple = ("date", "rrp")
    bool_columns: frozenset = BOOL_FEATURES
    date_format: str = "iso"


DEFAULT_SCHEMA = CsvSchema()


class TimeSeriesFrame:
    """Date-indexed multivariate daily series with NaN as missing sentinel."""

    def __init__(self, dates, features: dict):
        dates = tuple(dates)
        if len(dates) == 0:
            raise EmptyFile("frame must contain at least one row")
        for a, b in zip(dates, dates[1:]):
            if b == a:
                raise DuplicateDate(f"duplicate date {a}")
            if b < a:
                raise ValueError(f"dates not increasing: {a} then {b}")
        names = list(features)
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        cols = {}
        for name, values in features.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != len(dates):
                raise ValueError(f"column {name!r} length {arr.shape} != {len(dates)} rows")
            arr = arr.copy()
            arr.setflags(write=False)
            cols[name] = arr
        self._dates = dates
        self._features = cols

    @property
    def dates(self) -> tuple:
        return self._dates

    @property
    def feature_names(self) -> tuple:
        return tuple(self._features)

    @property
    def n_rows(self) -> int:
        return len(self._dates)

    def column(self, name: str) -> np.ndarray:
        if name not in self._features:
            raise KeyError(name)
        return self._features[name]

    def has_feature(self, name: str) -> bool:
        return name in self._features

    def to_matrix(self, names=None) -> np.ndarray:
        """Rows-by-features matrix in the given (default: frame) column order."""
        names = list(names) if names is not None else list(self._features)
        return np.column_stack([self.column(n) for n in names])

    def with_features(self, new: dict) -> "TimeSeriesFrame":
        """New frame with extra columns appended after the existing ones."""
        merged = {n: v for n, v in self._features.items()}
        for name, values in new.items():
            if name in merged:
                raise ValueError(f"feature {name!r} already present")
            merged[name] = values
        return TimeSeriesFrame(self._dates, merged)

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self._dates[start:stop],
            {n: v[start:stop] for n, v in self._features.items()},
        )

    def equals(self, other: "TimeSeriesFrame") -> bool:
        if self._dates != other._dates or self.feature_names != other.feature_names:
            return False
        return all(
            np.array_equal(self._features[n], other._features[n], equal_nan=True)
            for n in self._features
        )

    def __repr__(self):
        return f"TimeSeriesFrame({self.n_rows} rows, {len(self._features)} features)"


# --- CSV I/O -----------------------------------------------------------------

def _parse_date(text: str, fmt: str) -> date:
    text = text.strip()
    if fmt == "iso":
        return date.fromisoformat(text)
    if fmt == "dmy":
        return datetime.strptime(text, "%d/%m/%Y").date()
    raise ValueError(f"unknown date format {fmt!r}")


def _parse_numeric(text: str) -> float:
    text = text.strip()
    if text == "" or text.upper() == "NA":
        return MISSING
    try:
        return float(text)
    except ValueError:
        return MISSING


def _parse_bool(text: str) -> float:
    token = text.strip().lower()
    if token in _TRUE_TOKENS:
        return 1.0
    if token in _FALSE_TOKENS:
        return 0.0
    return MISSING


def load_csv(path, schema: CsvSchema = DEFAULT_SCHEMA) -> TimeSeriesFrame:
    """Read a daily CSV into a frame sorted by date.

    Unparseable numeric cells become NaN; boolean columns accept Y/N,
    true/false, and 1/0. Raises MissingColumn, DuplicateDate, or EmptyFile.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # drop blank lines
    if not rows:
        raise EmptyFile(f"{path}: no header row")
    header, data = rows[0], rows[1:]
    if not data:
        raise EmptyFile(f"{path}: header only, no records")

    index = {}
    for canonical, header_name in schema.columns.items():
        if header_name in header:
            index[canonical] = header.index(header_name)
        elif canonical in schema.required:
            raise MissingColumn(f"{path}: required column {header_name!r} not in header")

    date_idx = index.pop("date")
    records = []
    for row in data:
        d = _parse_date(row[date_idx], schema.date_format)
        values = {}
        for canonical, col_idx in index.items():
            cell = row[col_idx] if col_idx < len(row) else ""
            if canonical in schema.bool_columns:
                values[canonical] = _parse_bool(cell)
            else:
                values[canonical] = _parse_numeric(cell)
        records.append((d, values))

    records.sort(key=lambda rec: rec[0])
    dates = [rec[0] for rec in records]
    for a, b in zip(dates, dates[1:]):
        if a == b:
            raise DuplicateDate(f"{path}: duplicate date {a}")

    feature_names = [c for c in schema.columns if c != "date" and c in index]
    features = {
        name: np.array([rec[1][name] for rec in records], dtype=np.float64)
        for name in feature_names
    }
    return TimeSeriesFrame(dates, features)


def _format_cell(x: float) -> str:
    # builtin-float repr: shortest string that round-trips the exact value
    return "" if math.isnan(x) else repr(float(x))


def save_csv(frame: TimeSeriesFrame, path) -> None:
    """Write a frame back to CSV with full float precision (repr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(frame_to_csv(frame))


def frame_to_csv(frame: TimeSeriesFrame) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(frame.feature_names)
    writer.writerow(["date"] + names)
    cols = [frame.column(n) for n in names]
    for i, d in enumerate(frame.dates):
        writer.writerow([d.isoformat()] + [_format_cell(c[i]) for c in cols])
    return buf.getvalue()


def dataset_fingerprint(frame: TimeSeriesFrame) -> dict:
    """Row count plus a content hash, recorded in run manifests."""
    digest = hashlib.sha256(frame_to_csv(frame).encode("utf-8")).hexdigest()
    return {"rows": frame.n_rows, "sha256": digest}


def frame_summary(frame: TimeSeriesFrame) -> dict:
    """Schema/row statistics for the `inspect` command."""
    per_column = {}
    for name in frame.feature_names:
        col = frame.column(name)
        observed = col[np.isfinite(col)]
        per_column[name] = {
            "missing": int(np.count_nonzero(~np.isfinite(col))),
            "min": float(observed.min()) if observed.size else None,
            "max": float(observed.max()) if observed.size else None,
            "mean": float(observed.mean()) if observed.size else None,
        }
    return {
        "rows": frame.n_rows,
        "first_date": frame.dates[0].isoformat(),
        "last_date": frame.dates[-1].isoformat(),
        "features": per_column,
    }


# --- cleaning and enrichment --------------------------------------------------

def forward_fill(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Replace every missing cell with the most recent earlier observation.

    Leading missing cells take the first observed value (head backfill).
    Raises AllMissingColumn when a column has no observed value at all.
    """
    filled = {}
    for name in frame.feature_names:
        col = frame.column(name).copy()
        finite = np.isfinite(col)
        if not finite.any():
            raise AllMissingColumn(f"column {name!r} has no observed values")
        # forward fill: carry the index of the last finite value
        idx = np.where(finite, np.arange(col.size), -1)
        np.maximum.accumulate(idx, out=idx)
        head = idx < 0
        idx[head] = np.argmax(finite)  # first observed value backfills the head
        filled[name] = col[idx]
    return TimeSeriesFrame(frame.dates, filled)


def add_seasonal_features(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Append month_sin, month_cos, and weekend columns derived from dates."""
    months = np.array([d.month for d in frame.dates], dtype=np.float64)
    angle = 2.0 * np.pi * (months - 1.0) / 12.0
    weekend = np.array([1.0 if d.weekday() >= 5 else 0.0 for d in frame.dates])
    return frame.with_features(
        {"month_sin": np.sin(angle), "month_cos": np.cos(angle), "weekend": weekend}
    )


def calendar_row(d: date) -> dict:
    """Exact calendar feature values for a single date."""
    angle = 2.0 * math.pi * (d.month - 1) / 12.0
    return {
        "month_sin": math.sin(angle),
        "month_cos": math.cos(angle),
        "weekend": 1.0 if d.weekday() >= 5 else 0.0,
    }


# --- correlation ---------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple
    values: np.ndarray  # F x F, symmetric, entries in [-1, 1]
    constant_columns: tuple = ()  # division-by-zero guard notes

    def entry(self, a: str, b: str) -> float:
        i, j = self.names.index(a), self.names.index(b)
        return float(self.values[i, j])


def pearson_correlation(frame: TimeSeriesFrame, columns=None) -> CorrelationMatrix:
    """Population Pearson coefficients between the selected columns.

    Constant columns yield 0.0 everywhere (their own diagonal included) and
    are reported in ``constant_columns``. Raises TooFewRows for N < 2.
    """
    names = tuple(columns) if columns is not None else frame.feature_names
    if frame.n_rows < 2:
        raise TooFewRows(f"need N >= 2 rows, got {frame.n_rows}")
    X = frame.to_matrix(names)
    if not np.isfinite(X).all():
        raise ValueError("correlation requires columns with no missing values")

    centered = X - X.mean(axis=0)
    n = X.shape[0]
    std = np.sqrt((centered**2).sum(axis=0) / n)
    constant = std == 0.0

    F = len(names)
    values = np.zeros((F, F))
    for i in range(F):
        for j in range(i, F):
            if constant[i] or constant[j]:
                r = 0.0
            elif i == j:
                r = 1.0  # exact by definition, no roundoff
            else:
                cov = float(centered[:, i] @ centered[:, j]) / n
                r = cov / (std[i] * std[j])
                r = min(1.0, max(-1.0, r))
            values[i, j] = values[j, i] = r
    values.setflags(write=False)
    return CorrelationMatrix(
        names=names,
        values=values,
        constant_columns=tuple(str(names[k]) for k in range(F) if constant[k]),
    )


def correlation_to_csv(matrix: CorrelationMatrix) -> str:
    """Matrix as CSV with row/column headers, 6 decimal places."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + list(matrix.names))
    for i, name in enumerate(matrix.names):
        writer.writerow([name] + [f"{v:.6f}" for v in matrix.values[i]])
    return buf.getvalue()
