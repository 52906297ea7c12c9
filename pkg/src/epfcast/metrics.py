"""Forecast evaluation: error metrics plus spike-classification scores.

Regression quality is summarized by RMSE and MAE in price units. The
classification block treats price spikes as the positive class: a value
is a spike when it lies strictly above a threshold resolved from
training-partition actuals via a nearest-rank quantile. Accuracy,
precision, recall and F-score then follow from the spike confusion
table. Zero-denominator cases score 0.0 and carry an explicit note so
reports stay serializable and comparisons total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from math import ceil, sqrt
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyCounts, EmptyInput, LengthMismatch


def _pair(actual, predicted) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.size != p.size:
        raise LengthMismatch(f"actual has {a.size} values, predicted has {p.size}")
    if a.size == 0:
        raise EmptyInput("cannot score empty vectors")
    return a, p


def rmse(actual, predicted) -> float:
    """Root mean squared error: sqrt((1/n) * sum((y - yhat)^2))."""
    a, p = _pair(actual, predicted)
    diff = a - p
    return sqrt(float(np.mean(diff * diff)))


def mae(actual, predicted) -> float:
    """Mean absolute error: (1/n) * sum(|y - yhat|)."""
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def round_half_up(value: float, ndigits: int = 2) -> float:
    """Decimal rounding with halves away from zero (not banker's)."""
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class SpikeRule:
    """Spike definition: strictly above the train-quantile threshold."""

    quantile: float = 0.90
    threshold: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.quantile < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {self.quantile}")

    @property
    def resolved(self) -> bool:
        return self.threshold is not None

    def labels(self, values) -> np.ndarray:
        if self.threshold is None:
            raise ValueError("spike rule not resolved; call resolve_spike_threshold")
        return np.asarray(values, dtype=np.float64).ravel() > self.threshold


def resolve_spike_threshold(train_actuals, rule: SpikeRule) -> SpikeRule:
    """Fix the rule's threshold from training actuals.

    Nearest-rank quantile: the 1-based order statistic at ceil(q * n).
    """
    values = np.asarray(train_actuals, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInput("cannot resolve a spike threshold from no values")
    ordered = np.sort(values)
    rank = min(max(ceil(rule.quantile * values.size), 1), values.size)
    return SpikeRule(quantile=rule.quantile, threshold=float(ordered[rank - 1]))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_from_labels(actual_labels, predicted_labels) -> ConfusionCounts:
    a = np.asarray(actual_labels, dtype=bool).ravel()
    p = np.asarray(predicted_labels, dtype=bool).ravel()
    if a.size != p.size:
        raise LengthMismatch(f"{a.size} actual labels vs {p.size} predicted")
    return ConfusionCounts(
        tp=int(np.sum(a & p)),
        fp=int(np.sum(~a & p)),
        tn=int(np.sum(~a & ~p)),
        fn=int(np.sum(a & ~p)),
    )


def f_from_pr(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0.0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(c: ConfusionCounts):
    """(accuracy, precision, recall, f_score, notes) from confusion counts.

    notes lists which metrics had a zero denominator and were pinned to 0.
    """
    n = c.total
    if n == 0:
        raise EmptyCounts("no samples behind the confusion counts")
    notes = []
    accuracy = (c.tp + c.tn) / n
    if c.tp + c.fp > 0:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision = 0.0
        notes.append("precision undefined (no predicted positives); reported 0.0")
    if c.tp + c.fn > 0:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall = 0.0
        notes.append("recall undefined (no actual positives); reported 0.0")
    if precision + recall == 0.0:
        notes.append("f_score undefined (precision + recall == 0); reported 0.0")
    f_score = f_from_pr(precision, recall)
    return accuracy, precision, recall, f_score, tuple(notes)


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    accuracy: float
    precision: float
    recall: float
    f_score: float
    confusion: ConfusionCounts
    spike_threshold: float
    n: int
    notes: Tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "spike_threshold": self.spike_threshold,
            "n": self.n,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(
            rmse=doc["rmse"],
            mae=doc["mae"],
            accuracy=doc["accuracy"],
            precision=doc["precision"],
            recall=doc["recall"],
            f_score=doc["f_score"],
            confusion=ConfusionCounts(
                tp=doc["tp"], fp=doc["fp"], tn=doc["tn"], fn=doc["fn"]
            ),
            spike_threshold=doc["spike_threshold"],
            n=doc["n"],
            notes=tuple(doc.get("notes", ())),
        )


def full_report(actual, predicted, rule: SpikeRule) -> MetricsReport:
    """Score one prediction vector against actuals, in price units."""
    a, p = _pair(actual, predicted)
    if not rule.resolved:
        raise ValueError("spike rule not resolved; call resolve_spike_threshold")
    confusion = confusion_from_labels(rule.labels(a), rule.labels(p))
    accuracy, precision, recall, f_score, notes = classification_metrics(confusion)
    return MetricsReport(
        rmse=rmse(a, p),
        mae=mae(a, p),
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f_score=f_score,
        confusion=confusion,
        spike_threshold=float(rule.threshold),
        n=a.size,
        notes=notes,
    )


def _fixed(value: float, ndigits: int) -> str:
    return f"{round_half_up(value, ndigits):.{ndigits}f}"


COMPARISON_HEADER = "model,accuracy_pct,precision,recall,f_score,rmse,mae"


def comparison_csv(rows: Sequence[Tuple[str, MetricsReport]]) -> str:
    """One CSV row per model: accuracy as a percentage, then the rest.

    Formatting is fixed-precision so identical inputs always serialize to
    identical bytes.
    """
    lines = [COMPARISON_HEADER]
    for name, report in rows:
        lines.append(",".join([
            name,
            _fixed(report.accuracy * 100.0, 2),
            _fixed(report.precision, 2),
            _fixed(report.recall, 2),
            _fixed(report.f_score, 2),
            _fixed(report.rmse, 4),
            _fixed(report.mae, 4),
        ]))
    return "\n".join(lines) + "\n"
