"""Layer implementations for the from-scratch network stack.

Every layer exposes the same small surface:

* ``forward(x, training=..., step=...) -> (y, cache)`` with ``x`` batch-first
  and 64-bit; the cache is whatever the backward pass needs.
* ``backward(dy, cache) -> (dx, grads)`` where ``grads`` maps parameter
  names to arrays shaped like the parameters.
* ``output_shape(shape)`` maps a per-sample input shape to the output
  shape, raising ShapeMismatch / ShapeUnderflow for impossible wiring.

Layers hold parameters but no forward state; caches travel through the
model graph so a graph instance can enforce forward/backward pairing.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..errors import InvalidRate, ShapeMismatch, ShapeUnderflow
from . import kernels


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0.0)


def lstm_step(x_t, h_prev, c_prev, wx, wh, b):
    """One LSTM cell step.

    Args:
        x_t: input at this step, (B, D).
        h_prev, c_prev: previous hidden and cell states, (B, H).
        wx: input weights (D, 4H); wh: recurrent weights (H, 4H);
            b: bias (4H,). Gate order along the 4H axis is input,
            forget, candidate, output.

    Returns:
        (h_t, c_t), both (B, H).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    hidden = wh.shape[0]
    if x_t.ndim != 2 or x_t.shape[1] != wx.shape[0]:
        raise ShapeMismatch(f"lstm_step input {x_t.shape} does not match weights {wx.shape}")
    if h_prev.shape != (x_t.shape[0], hidden) or c_prev.shape != h_prev.shape:
        raise ShapeMismatch("lstm_step state shapes do not match the hidden size")
    z = x_t @ wx + h_prev @ wh + b
    i = kernels.sigmoid(z[:, :hidden])
    f = kernels.sigmoid(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = kernels.sigmoid(z[:, 3 * hidden:])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def dropout_mask(shape, rate: float, seed: int, step: int) -> np.ndarray:
    """Boolean keep-mask for inverted dropout, fully determined by (seed, step)."""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"dropout rate must be in [0, 1), got {rate}")
    rng = np.random.default_rng([seed, step])
    return rng.random(shape) >= rate


def dropout(x, rate: float, training: bool, seed: int, step: int = 0) -> np.ndarray:
    """Inverted dropout: identity at inference, mask/(1-rate) in training."""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x.copy()
    mask = dropout_mask(x.shape, rate, seed, step)
    return x * mask / (1.0 - rate)


class Conv1D:
    """Valid (no padding) 1-D convolution along the time axis."""

    kind = "conv1d"
    param_names = ("w", "b")

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, *, rng: Optional[np.random.Generator] = None):
        if kernel < 1 or stride < 1 or out_channels < 1 or in_channels < 1:
            raise ShapeMismatch(
                "conv1d needs kernel >= 1, stride >= 1 and positive channel counts"
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        if rng is None:
            rng = np.random.default_rng(0)
        fan_in = in_channels * kernel
        fan_out = out_channels * kernel
        self.params = {
            "w": glorot_uniform(rng, (out_channels, in_channels, kernel), fan_in, fan_out),
            "b": np.zeros(out_channels, dtype=np.float64),
        }

    def hyper(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
        }

    def output_shape(self, shape):
        if len(shape) != 2:
            raise ShapeMismatch(f"conv1d expects (time, channels), got {shape}")
        length, channels = shape
        if channels != self.in_channels:
            raise ShapeMismatch(
                f"conv1d expects {self.in_channels} channels, got {channels}"
            )
        if length < self.kernel:
            raise ShapeUnderflow(
                f"conv1d kernel {self.kernel} does not fit temporal length {length}"
            )
        return ((length - self.kernel) // self.stride + 1, self.out_channels)

    def forward(self, x, training: bool = False, step: int = 0):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeMismatch(
                f"conv1d expects (batch, time, {self.in_channels}), got {x.shape}"
            )
        if x.shape[1] < self.kernel:
            raise ShapeMismatch(
                f"conv1d kernel {self.kernel} does not fit input length {x.shape[1]}"
            )
        y = kernels.conv1d_forward(x, self.params["w"], self.params["b"], self.stride)
        return y, x

    def backward(self, dy, cache):
        x = cache
        dx, dw, db = kernels.conv1d_backward(x, self.params["w"], self.stride, dy)
        return dx, {"w": dw, "b": db}


class MaxPool1D:
    """Max pooling along time; ties route the gradient to the earliest index."""

    kind = "maxpool1d"
    param_names = ()

    def __init__(self, pool: int, stride: Optional[int] = None):
        if pool < 1:
            raise ShapeMismatch("pool size must be >= 1")
        self.pool = pool
        self.stride = pool if stride is None else stride
        if self.stride < 1:
            raise ShapeMismatch("pool stride must be >= 1")
        self.params = {}

    def hyper(self) -> dict:
        return {"pool": self.pool, "stride": self.stride}

    def output_shape(self, shape):
        if len(shape) != 2:
            raise ShapeMismatch(f"maxpool1d expects (time, channels), got {shape}")
        length, channels = shape
        if length < self.pool:
            raise ShapeUnderflow(
                f"pool {self.pool} does not fit temporal length {length}"
            )
        return ((length - self.pool) // self.stride + 1, channels)

    def forward(self, x, training: bool = False, step: int = 0):
        if x.ndim != 3:
            raise ShapeMismatch(f"maxpool1d expects a 3-d batch, got {x.shape}")
        if x.shape[1] < self.pool:
            raise ShapeMismatch(
                f"pool {self.pool} does not fit input length {x.shape[1]}"
            )
        y, arg = kernels.maxpool1d_forward(x, self.pool, self.stride)
        return y, (arg, x.shape[1])

    def backward(self, dy, cache):
        arg, length = cache
        dx = kernels.maxpool1d_backward(dy, arg, length)
        return dx, {}


class Flatten:
    kind = "flatten"
    param_names = ()

    def __init__(self):
        self.params = {}

    def hyper(self) -> dict:
        return {}

    def output_shape(self, shape):
        if len(shape) < 1:
            raise ShapeMismatch("flatten needs at least one axis")
        size = 1
        for s in shape:
            size *= s
        return (size,)

    def forward(self, x, training: bool = False, step: int = 0):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}


class Dense:
    """Affine map y = x W^T + b with W shaped (out, in)."""

    kind = "dense"
    param_names = ("w", "b")

    def __init__(self, in_size: int, out_size: int, *,
                 rng: Optional[np.random.Generator] = None):
        if in_size < 1 or out_size < 1:
            raise ShapeMismatch("dense sizes must be positive")
        self.in_size = in_size
        self.out_size = out_size
        if rng is None:
            rng = np.random.default_rng(0)
        self.params = {
            "w": glorot_uniform(rng, (out_size, in_size), in_size, out_size),
            "b": np.zeros(out_size, dtype=np.float64),
        }

    def hyper(self) -> dict:
        return {"in_size": self.in_size, "out_size": self.out_size}

    def output_shape(self, shape):
        if len(shape) != 1 or shape[0] != self.in_size:
            raise ShapeMismatch(
                f"dense expects ({self.in_size},) per sample, got {shape}"
            )
        return (self.out_size,)

    def forward(self, x, training: bool = False, step: int = 0):
        if x.ndim != 2 or x.shape[1] != self.in_size:
            raise ShapeMismatch(
                f"dense expects (batch, {self.in_size}), got {x.shape}"
            )
        y = x @ self.params["w"].T + self.params["b"]
        return y, x

    def backward(self, dy, cache):
        x = cache
        dw = dy.T @ x
        db = dy.sum(axis=0)
        dx = dy @ self.params["w"]
        return dx, {"w": dw, "b": db}


class ReLU:
    kind = "relu"
    param_names = ()

    def __init__(self):
        self.params = {}

    def hyper(self) -> dict:
        return {}

    def output_shape(self, shape):
        return tuple(shape)

    def forward(self, x, training: bool = False, step: int = 0):
        # subgradient at exactly 0 is 0, hence the strict comparison
        return np.maximum(x, 0.0), x > 0.0

    def backward(self, dy, cache):
        return dy * cache, {}


class Dropout:
    """Inverted dropout; the mask stream is fixed by (layer seed, step)."""

    kind = "dropout"
    param_names = ()

    def __init__(self, rate: float, seed: int = 0):
        if not 0.0 <= rate < 1.0:
            raise InvalidRate(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.seed = int(seed)
        self.params = {}

    def hyper(self) -> dict:
        return {"rate": self.rate, "seed": self.seed}

    def output_shape(self, shape):
        return tuple(shape)

    def forward(self, x, training: bool = False, step: int = 0):
        if not training or self.rate == 0.0:
            return x, None
        mask = dropout_mask(x.shape, self.rate, self.seed, step)
        scale = 1.0 / (1.0 - self.rate)
        return x * mask * scale, (mask, scale)

    def backward(self, dy, cache):
        if cache is None:
            return dy, {}
        mask, scale = cache
        return dy * mask * scale, {}


class LSTM:
    """Single LSTM layer over the whole window; emits the last hidden state.

    Weight layout: wx (in, 4*hidden), wh (hidden, 4*hidden), b (4*hidden,)
    with gates stacked input/forget/candidate/output. The forget-gate bias
    starts at 1.0.
    """

    kind = "lstm"
    param_names = ("wx", "wh", "b")

    def __init__(self, in_size: int, hidden: int, *,
                 rng: Optional[np.random.Generator] = None):
        if in_size < 1 or hidden < 1:
            raise ShapeMismatch("lstm sizes must be positive")
        self.in_size = in_size
        self.hidden = hidden
        if rng is None:
            rng = np.random.default_rng(0)
        b = np.zeros(4 * hidden, dtype=np.float64)
        b[hidden:2 * hidden] = 1.0
        self.params = {
            "wx": glorot_uniform(rng, (in_size, 4 * hidden), in_size, 4 * hidden),
            "wh": glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden),
            "b": b,
        }

    def hyper(self) -> dict:
        return {"in_size": self.in_size, "hidden": self.hidden}

    def output_shape(self, shape):
        if len(shape) != 2 or shape[1] != self.in_size:
            raise ShapeMismatch(
                f"lstm expects (time, {self.in_size}) per sample, got {shape}"
            )
        if shape[0] < 1:
            raise ShapeUnderflow("lstm needs at least one time step")
        return (self.hidden,)

    def forward(self, x, training: bool = False, step: int = 0):
        if x.ndim != 3 or x.shape[2] != self.in_size:
            raise ShapeMismatch(
                f"lstm expects (batch, time, {self.in_size}), got {x.shape}"
            )
        hs, cs, ifgo, tanh_c = kernels.lstm_forward(
            x, self.params["wx"], self.params["wh"], self.params["b"]
        )
        y = np.ascontiguousarray(hs[:, -1, :])
        return y, (x, hs, cs, ifgo, tanh_c)

    def backward(self, dy, cache):
        x, hs, cs, ifgo, tanh_c = cache
        dx, dwx, dwh, db = kernels.lstm_backward(
            x, self.params["wx"], self.params["wh"], hs, cs, ifgo, tanh_c, dy
        )
        return dx, {"wx": dwx, "wh": dwh, "b": db}


class RNN:
    """Elman recurrence h_t = tanh(wx x_t + wh h_{t-1} + b); last hidden out."""

    kind = "rnn"
    param_names = ("wx", "wh", "b")

    def __init__(self, in_size: int, hidden: int, *,
                 rng: Optional[np.random.Generator] = None):
        if in_size < 1 or hidden < 1:
            raise ShapeMismatch("rnn sizes must be positive")
        self.in_size = in_size
        self.hidden = hidden
        if rng is None:
            rng = np.random.default_rng(0)
        self.params = {
            "wx": glorot_uniform(rng, (in_size, hidden), in_size, hidden),
            "wh": glorot_uniform(rng, (hidden, hidden), hidden, hidden),
            "b": np.zeros(hidden, dtype=np.float64),
        }

    def hyper(self) -> dict:
        return {"in_size": self.in_size, "hidden": self.hidden}

    def output_shape(self, shape):
        if len(shape) != 2 or shape[1] != self.in_size:
            raise ShapeMismatch(
                f"rnn expects (time, {self.in_size}) per sample, got {shape}"
            )
        if shape[0] < 1:
            raise ShapeUnderflow("rnn needs at least one time step")
        return (self.hidden,)

    def forward(self, x, training: bool = False, step: int = 0):
        if x.ndim != 3 or x.shape[2] != self.in_size:
            raise ShapeMismatch(
                f"rnn expects (batch, time, {self.in_size}), got {x.shape}"
            )
        hs = kernels.rnn_forward(x, self.params["wx"], self.params["wh"], self.params["b"])
        y = np.ascontiguousarray(hs[:, -1, :])
        return y, (x, hs)

    def backward(self, dy, cache):
        x, hs = cache
        dx, dwx, dwh, db = kernels.rnn_backward(
            x, self.params["wx"], self.params["wh"], hs, dy
        )
        return dx, {"wx": dwx, "wh": dwh, "b": db}


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Conv1D, MaxPool1D, Flatten, Dense, ReLU, Dropout, LSTM, RNN)
}


def layer_from_hyper(kind: str, hyper: dict):
    """Rebuild a layer from its kind and hyper-settings (params left at init)."""
    if kind not in LAYER_KINDS:
        raise ShapeMismatch(f"unknown layer kind {kind!r}")
    cls = LAYER_KINDS[kind]
    if kind == "conv1d":
        return cls(hyper["in_channels"], hyper["out_channels"],
                   hyper["kernel"], hyper["stride"])
    if kind == "maxpool1d":
        return cls(hyper["pool"], hyper["stride"])
    if kind == "dense":
        return cls(hyper["in_size"], hyper["out_size"])
    if kind == "dropout":
        return cls(hyper["rate"], hyper["seed"])
    if kind in ("lstm", "rnn"):
        return cls(hyper["in_size"], hyper["hidden"])
    return cls()
