"""Builders for the three comparison architectures.

All three return a ModelGraph over per-sample inputs shaped
(window, n_features):

* hybrid: repeated conv-relu-pool feature extraction along the time
  axis, an LSTM over the reduced sequence, dropout on the last hidden
  state, then a dense head.
* rnn: Elman recurrence with a dense head (the sequence baseline).
* ann: flatten plus a dense/relu stack (the feed-forward baseline).

Architecture sizes are configuration, not constants; the defaults here
are this artifact's choices and get recorded in run manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .nn.graph import ModelGraph
from .nn.layers import LSTM, RNN, Conv1D, Dense, Dropout, Flatten, MaxPool1D, ReLU

DEFAULT_CONV_BLOCKS: Tuple[Tuple[int, int, int], ...] = ((16, 3, 2), (32, 3, 2))


@dataclass(frozen=True)
class HybridConfig:
    """Settings for the hybrid model.

    conv_blocks is a sequence of (out_channels, kernel, pool) triples; an
    empty sequence degenerates to a pure LSTM model (the ablation path).
    The last entry of dense_head is the forecast horizon.
    """

    window: int
    n_features: int
    conv_blocks: Tuple[Tuple[int, int, int], ...] = DEFAULT_CONV_BLOCKS
    lstm_hidden: int = 64
    dense_head: Tuple[int, ...] = (32, 1)
    dropout_rate: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks",
                           tuple(tuple(int(v) for v in blk) for blk in self.conv_blocks))
        object.__setattr__(self, "dense_head",
                           tuple(int(v) for v in self.dense_head))
        if self.window < 1 or self.n_features < 1:
            raise ConfigError("window and n_features must be positive")
        if not self.dense_head:
            raise ConfigError("dense_head must not be empty")
        if self.lstm_hidden < 1:
            raise ConfigError("lstm_hidden must be positive")

    @property
    def horizon(self) -> int:
        return self.dense_head[-1]


def build_hybrid(config: HybridConfig, seed: int = 0) -> ModelGraph:
    """Assemble the conv+LSTM hybrid.

    Raises ShapeUnderflow when the conv/pool chain exhausts the temporal
    axis before the LSTM gets at least one step.
    """
    rng = np.random.default_rng(seed)
    layers = []
    channels = config.n_features
    for out_channels, kernel, pool in config.conv_blocks:
        layers.append(Conv1D(channels, out_channels, kernel, stride=1, rng=rng))
        layers.append(ReLU())
        layers.append(MaxPool1D(pool))
        channels = out_channels
    layers.append(LSTM(channels, config.lstm_hidden, rng=rng))
    if config.dropout_rate > 0.0:
        layers.append(Dropout(config.dropout_rate,
                              seed=int(rng.integers(0, 2**31 - 1))))
    width = config.lstm_hidden
    for i, size in enumerate(config.dense_head):
        layers.append(Dense(width, size, rng=rng))
        if i < len(config.dense_head) - 1:
            layers.append(ReLU())
        width = size
    return ModelGraph(layers, (config.window, config.n_features), seed=seed)


def build_rnn(window: int, n_features: int, hidden: int = 64,
              horizon: int = 1, seed: int = 0) -> ModelGraph:
    """Elman RNN baseline: recurrence over the window, dense head."""
    if hidden < 1:
        raise ConfigError("hidden must be >= 1")
    rng = np.random.default_rng(seed)
    layers = [
        RNN(n_features, hidden, rng=rng),
        Dense(hidden, horizon, rng=rng),
    ]
    return ModelGraph(layers, (window, n_features), seed=seed)


def build_ann(window: int, n_features: int,
              hidden_sizes: Sequence[int] = (64, 32),
              horizon: int = 1, seed: int = 0) -> ModelGraph:
    """Feed-forward baseline: flatten, dense/relu stack, linear head."""
    hidden_sizes = tuple(int(h) for h in hidden_sizes)
    if not hidden_sizes:
        raise ConfigError("hidden_sizes must not be empty")
    rng = np.random.default_rng(seed)
    layers = [Flatten()]
    width = window * n_features
    for size in hidden_sizes:
        layers.append(Dense(width, size, rng=rng))
        layers.append(ReLU())
        width = size
    layers.append(Dense(width, horizon, rng=rng))
    return ModelGraph(layers, (window, n_features), seed=seed)
