"""Exception hierarchy for the forecasting engine.

Every contract violation raises a named exception rather than returning a
sentinel, so callers (and the CLI) can distinguish bad input from bugs.
"""


class EpfcastError(Exception):
    """Base class for all engine errors."""


# --- data ingestion ---------------------------------------------------------

class MissingColumn(EpfcastError):
    """A schema-required column is absent from the CSV header."""


class DuplicateDate(EpfcastError):
    pass


class EmptyFile(EpfcastError):
    pass


class AllMissingColumn(EpfcastError):
    """A column has no observed value, so it cannot be filled."""


class TooFewRows(EpfcastError):
    pass


# --- preprocessing ----------------------------------------------------------

class EmptyRange(EpfcastError):
    pass


class UnknownFeature(EpfcastError):
    pass


class SeriesTooShort(EpfcastError):
    """Series shorter than window + horizon; no supervised sample fits."""


# --- network kernel ---------------------------------------------------------

class ShapeMismatch(EpfcastError):
    pass


class InvalidRate(EpfcastError):
    pass


class NonFiniteActivation(EpfcastError):
    """NaN or Inf crossed a layer boundary."""


class StaleCache(EpfcastError):
    """Backward called with a cache not produced by the matching forward."""


class NonDeterministicForward(EpfcastError):
    pass


class ShapeUnderflow(EpfcastError):
    """Conv/pool reductions exhausted the temporal axis."""


# --- training ---------------------------------------------------------------

class EmptyDataset(EpfcastError):
    pass


class DivergedLoss(EpfcastError):
    """Training loss became non-finite; carries the epoch index."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


# --- metrics ----------------------------------------------------------------

class LengthMismatch(EpfcastError):
    pass


class EmptyInput(EpfcastError):
    pass


class EmptyCounts(EpfcastError):
    pass


# --- forecasting ------------------------------------------------------------

class HistoryTooShort(EpfcastError):
    pass


class EmptyResult(EpfcastError):
    """Aggregation asked for on a forecast with no rows."""


class NonFinitePrediction(EpfcastError):
    """Recursive forecast produced NaN/Inf; carries the step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite prediction at step {step}")


# --- configuration ----------------------------------------------------------

class ConfigError(EpfcastError):
    """Bad run configuration (unknown key, invalid value, missing source)."""
