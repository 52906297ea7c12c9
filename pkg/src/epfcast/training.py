"""Training loop, loss, and optimizers for the forecast models.

The optimization target is mean squared error on scaled targets (RMSE
shares its minimizers; reporting happens in price units elsewhere).
Mini-batch order is a seeded permutation per epoch, validation is the
chronological tail of the training partition, and early stopping always
hands back the best-validation parameters. Given (model seed, data
seed, config) the whole run is deterministic; only the wall-clock
column of the history varies between reruns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigError,
    DivergedLoss,
    EmptyDataset,
    NonFiniteActivation,
    ShapeMismatch,
)
from .metrics import MetricsReport, SpikeRule, full_report
from .nn.graph import ModelGraph
from .preprocess import ScalerParams, WindowedDataset


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    early_stop_patience: int = 10
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ConfigError("validation_fraction must lie in [0, 0.5]")
        if not 0.0 <= self.adam_beta1 < 1.0 or not 0.0 <= self.adam_beta2 < 1.0:
            raise ConfigError("adam betas must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "early_stop_patience": self.early_stop_patience,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch record; ``seconds`` is wall-clock and excluded from
    determinism comparisons (see core_dict)."""

    train_loss: Tuple[float, ...]
    val_loss: Tuple[float, ...]
    seconds: Tuple[float, ...]
    best_epoch: int

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def core_dict(self) -> dict:
        """Everything that must be bit-identical across reruns."""
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "best_epoch": self.best_epoch,
        }

    def to_dict(self) -> dict:
        doc = self.core_dict()
        doc["seconds"] = list(self.seconds)
        return doc


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the predictions.

    loss = (1/n) sum((yhat - y)^2), grad = 2 (yhat - y) / n with n the
    total element count.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ShapeMismatch(
            f"predictions {predictions.shape} vs targets {targets.shape}"
        )
    diff = predictions - targets
    n = diff.size
    return float(np.mean(diff * diff)), 2.0 * diff / n


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0


def init_adam_state(params: Sequence[np.ndarray]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
    )


def adam_update(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: Optional[AdamState],
    config: TrainConfig,
) -> Tuple[List[np.ndarray], AdamState]:
    """One Adam step with bias correction; purely functional.

    Returns fresh parameter arrays and a fresh state; inputs are never
    mutated. The denominator is sqrt(v_hat + eps).
    """
    if state is None:
        state = init_adam_state(params)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and state must align")
    b1, b2 = config.adam_beta1, config.adam_beta2
    eps = config.adam_epsilon
    t = state.t + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatch(f"grad shape {g.shape} vs param shape {p.shape}")
        m2 = b1 * m + (1.0 - b1) * g
        v2 = b2 * v + (1.0 - b2) * g * g
        m_hat = m2 / c1
        v_hat = v2 / c2
        new_params.append(p - config.learning_rate * m_hat / np.sqrt(v_hat + eps))
        new_m.append(m2)
        new_v.append(v2)
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def sgd_update(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    learning_rate: float,
) -> List[np.ndarray]:
    """Plain gradient descent step; returns fresh arrays."""
    out = []
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"grad shape {g.shape} vs param shape {p.shape}")
        out.append(p - learning_rate * g)
    return out


def _dataset_mse(model: ModelGraph, dataset: WindowedDataset) -> float:
    preds = model.predict(dataset.inputs)
    loss, _ = mse_loss(preds, dataset.targets)
    return loss


def train_model(
    model: ModelGraph,
    train_set: WindowedDataset,
    config: TrainConfig,
    validation_fn: Optional[Callable[[ModelGraph], float]] = None,
) -> Tuple[ModelGraph, TrainHistory]:
    """Fit the model in place and return it with its history.

    The last validation_fraction of the samples (chronologically) is held
    out as the early-stopping monitor; with a fraction of 0 the full
    training set doubles as the monitor. validation_fn, when given,
    replaces the monitor entirely (used by tests to script loss
    sequences).

    Raises:
        EmptyDataset: no training samples.
        DivergedLoss: a non-finite loss or activation, tagged with the
            epoch it happened in.
    """
    n = train_set.n_samples
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    n_val = int(n * config.validation_fraction)
    fit_set = train_set.slice(0, n - n_val)
    val_set = train_set.slice(n - n_val, n) if n_val > 0 else None

    rng = np.random.default_rng(config.seed)
    handles = model.parameters()
    arrays = [p for _, _, p in handles]
    adam_state: Optional[AdamState] = None
    if config.optimizer == "adam":
        adam_state = init_adam_state(arrays)

    best_val = math.inf
    best_epoch = -1
    best_state = model.get_state()
    since_best = 0
    train_losses: List[float] = []
    val_losses: List[float] = []
    seconds: List[float] = []
    global_step = 0
    x_fit, y_fit = fit_set.inputs, fit_set.targets

    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(fit_set.n_samples)
        weighted = 0.0
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            try:
                out, cache = model.forward(x_fit[batch], training=True,
                                           step=global_step)
                loss, dy = mse_loss(out, y_fit[batch])
                if not math.isfinite(loss):
                    raise DivergedLoss(epoch, f"batch loss became {loss}")
                _, layer_grads = model.backward(cache, dy)
            except NonFiniteActivation as exc:
                raise DivergedLoss(epoch, str(exc)) from exc
            grads = [layer_grads[idx][name] for idx, name, _ in handles]
            if config.optimizer == "adam":
                updated, adam_state = adam_update(arrays, grads, adam_state, config)
            else:
                updated = sgd_update(arrays, grads, config.learning_rate)
            for dst, src in zip(arrays, updated):
                dst[...] = src
            weighted += loss * batch.size
            global_step += 1
        train_loss = weighted / fit_set.n_samples

        if validation_fn is not None:
            val_loss = float(validation_fn(model))
        elif val_set is not None:
            val_loss = _dataset_mse(model, val_set)
        else:
            val_loss = _dataset_mse(model, fit_set)
        if not math.isfinite(val_loss):
            raise DivergedLoss(epoch, f"validation loss became {val_loss}")

        train_losses.append(train_loss)
        val_losses.append(val_loss)
        seconds.append(time.perf_counter() - started)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = model.get_state()
            since_best = 0
        else:
            since_best += 1
        if config.early_stop_patience > 0 and since_best >= config.early_stop_patience:
            break

    model.set_state(best_state)
    history = TrainHistory(
        train_loss=tuple(train_losses),
        val_loss=tuple(val_losses),
        seconds=tuple(seconds),
        best_epoch=best_epoch,
    )
    return model, history


def predict_prices(
    model: ModelGraph,
    dataset: WindowedDataset,
    scaler: ScalerParams,
) -> Tuple[np.ndarray, np.ndarray]:
    """(actual, predicted) in price units, flattened over the horizon."""
    if dataset.n_samples == 0:
        raise EmptyDataset("no samples to evaluate")
    preds = model.predict(dataset.inputs)
    actual = scaler.invert_values(dataset.target_feature, dataset.targets).ravel()
    predicted = scaler.invert_values(dataset.target_feature, preds).ravel()
    return actual, predicted


def evaluate_model(
    model: ModelGraph,
    test_set: WindowedDataset,
    scaler: ScalerParams,
    rule: SpikeRule,
) -> MetricsReport:
    """Score the model on a windowed set, in price units."""
    actual, predicted = predict_prices(model, test_set, scaler)
    return full_report(actual, predicted, rule)


def persistence_predictions(dataset: WindowedDataset) -> np.ndarray:
    """Naive baseline: repeat the window's last target value over the horizon."""
    if dataset.n_samples == 0:
        raise EmptyDataset("no samples to predict")
    ti = dataset.feature_names.index(dataset.target_feature)
    last = dataset.inputs[:, -1, ti]
    return np.repeat(last[:, None], dataset.horizon, axis=1)
