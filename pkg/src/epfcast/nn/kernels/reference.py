"""Vectorized numpy kernels: the pure-Python fallback backend.

Shapes follow the batch-first, time-major layout used everywhere in the
package: sequence tensors are (batch, time, channels). All arrays are
float64; gate order in recurrent weight matrices is (input, forget,
candidate, output) stacked along the last axis.
"""

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# --- 1-D convolution ----------------------------------------------------------

def conv1d_forward(x, w, b, stride):
    """x: (B, L, Cin), w: (Cout, Cin, K), b: (Cout,) -> (B, Lout, Cout).

    Valid (no) padding: Lout = (L - K) // stride + 1.
    """
    B, L, Cin = x.shape
    Cout, _, K = w.shape
    Lout = (L - K) // stride + 1
    end = (Lout - 1) * stride + 1
    y = np.zeros((B, Lout, Cout))
    for k in range(K):
        y += x[:, k : k + end : stride, :] @ w[:, :, k].T
    return y + b


def conv1d_backward(x, w, stride, dy):
    """Gradients for conv1d_forward: returns (dx, dw, db)."""
    B, L, Cin = x.shape
    Cout, _, K = w.shape
    Lout = dy.shape[1]
    end = (Lout - 1) * stride + 1
    dw = np.empty_like(w)
    dx = np.zeros_like(x)
    for k in range(K):
        xs = x[:, k : k + end : stride, :]  # (B, Lout, Cin)
        dw[:, :, k] = np.einsum("bto,bti->oi", dy, xs)
        dx[:, k : k + end : stride, :] += dy @ w[:, :, k]
    db = dy.sum(axis=(0, 1))
    return dx, dw, db


# --- max pooling ----------------------------------------------------------------

def maxpool1d_forward(x, pool, stride):
    """x: (B, L, C) -> (y: (B, Lout, C), argmax: absolute time indices).

    Ties take the earliest index so the backward routing is deterministic.
    """
    B, L, C = x.shape
    Lout = (L - pool) // stride + 1
    starts = np.arange(Lout) * stride
    idx = starts[:, None] + np.arange(pool)[None, :]  # (Lout, pool)
    windows = x[:, idx, :]  # (B, Lout, pool, C)
    rel = windows.argmax(axis=2)  # first occurrence wins ties
    y = np.take_along_axis(windows, rel[:, :, None, :], axis=2)[:, :, 0, :]
    argmax = rel + starts[None, :, None]
    return y, argmax


def maxpool1d_backward(dy, argmax, length):
    """Route each upstream gradient to the element that won the max."""
    B, Lout, C = dy.shape
    dx = np.zeros((B, length, C))
    b_idx = np.arange(B)[:, None, None]
    c_idx = np.arange(C)[None, None, :]
    np.add.at(dx, (b_idx, argmax, c_idx), dy)
    return dx


# --- LSTM (full sequence, last hidden state) -------------------------------------

def lstm_forward(x, wx, wh, b):
    """x: (B, T, D), wx: (D, 4H), wh: (H, 4H), b: (4H,).

    Returns (hs, cs, ifgo, tanh_c) where hs/cs are (B, T+1, H) including the
    zero initial state, ifgo holds the activated gates per step, and tanh_c
    caches tanh(c_t) for the backward pass.
    """
    B, T, D = x.shape
    H = wh.shape[0]
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    ifgo = np.empty((B, T, 4 * H))
    tanh_c = np.empty((B, T, H))
    for t in range(T):
        z = x[:, t, :] @ wx + hs[:, t, :] @ wh + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = sigmoid(z[:, 3 * H :])
        c = f * cs[:, t, :] + i * g
        tc = np.tanh(c)
        hs[:, t + 1, :] = o * tc
        cs[:, t + 1, :] = c
        ifgo[:, t, :H] = i
        ifgo[:, t, H : 2 * H] = f
        ifgo[:, t, 2 * H : 3 * H] = g
        ifgo[:, t, 3 * H :] = o
        tanh_c[:, t, :] = tc
    return hs, cs, ifgo, tanh_c


def lstm_backward(x, wx, wh, hs, cs, ifgo, tanh_c, dh_last):
    """Backprop-through-time from the gradient at the last hidden state."""
    B, T, D = x.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dx = np.empty_like(x)
    dh = np.array(dh_last, copy=True)
    dc = np.zeros((B, H))
    dz = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        i = ifgo[:, t, :H]
        f = ifgo[:, t, H : 2 * H]
        g = ifgo[:, t, 2 * H : 3 * H]
        o = ifgo[:, t, 3 * H :]
        tc = tanh_c[:, t, :]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * cs[:, t, :] * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dwx += x[:, t, :].T @ dz
        dwh += hs[:, t, :].T @ dz
        db += dz.sum(axis=0)
        dx[:, t, :] = dz @ wx.T
        dh = dz @ wh.T
        dc = dc * f
    return dx, dwx, dwh, db


# --- Elman RNN ---------------------------------------------------------------------

def rnn_forward(x, wx, wh, b):
    """h_t = tanh(x_t Wx + h_{t-1} Wh + b); returns hs (B, T+1, H)."""
    B, T, D = x.shape
    H = wh.shape[0]
    hs = np.zeros((B, T + 1, H))
    for t in range(T):
        hs[:, t + 1, :] = np.tanh(x[:, t, :] @ wx + hs[:, t, :] @ wh + b)
    return hs


def rnn_backward(x, wx, wh, hs, dh_last):
    """Backprop-through-time for the Elman recurrence."""
    B, T, D = x.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(H)
    dx = np.empty_like(x)
    dh = np.array(dh_last, copy=True)
    for t in range(T - 1, -1, -1):
        h = hs[:, t + 1, :]
        dz = dh * (1.0 - h * h)
        dwx += x[:, t, :].T @ dz
        dwh += hs[:, t, :].T @ dz
        db += dz.sum(axis=0)
        dx[:, t, :] = dz @ wx.T
        dh = dz @ wh.T
    return dx, dwx, dwh, db
