"""Finite-difference verification of every backward pass."""

import numpy as np
import pytest

from epfcast.errors import NonDeterministicForward
from epfcast.nn.gradcheck import gradient_check
from epfcast.nn.graph import ModelGraph
from epfcast.nn.layers import (
    LSTM,
    RNN,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    ReLU,
)

TOL = 1e-4


def _check(graph, batch=3, seed=0, **kw):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch,) + graph.input_shape)
    targets = rng.normal(size=(batch,) + graph.output_shape)
    return gradient_check(graph, x, targets, **kw)


def test_single_dense_is_essentially_exact():
    # quadratic loss in the parameters: central differences are near-exact
    g = ModelGraph([Dense(4, 3, rng=np.random.default_rng(0))], input_shape=(4,))
    assert _check(g) < 1e-8


def test_epsilon_window_enforced():
    g = ModelGraph([Dense(2, 1)], input_shape=(2,))
    with pytest.raises(ValueError):
        _check(g, epsilon=1e-7)
    with pytest.raises(ValueError):
        _check(g, epsilon=1e-3)


def test_input_gradient_option():
    g = ModelGraph(
        [Dense(4, 4, rng=np.random.default_rng(1)), ReLU(),
         Dense(4, 2, rng=np.random.default_rng(2))],
        input_shape=(4,),
    )
    assert _check(g, check_input=True) < TOL


def test_nondeterministic_forward_detected():
    class NoisyDense(Dense):
        def forward(self, x, training=False, step=0):
            y, cache = super().forward(x, training=training, step=step)
            return y + np.random.default_rng().normal(0, 1e-9, y.shape), cache

    g = ModelGraph([NoisyDense(3, 2)], input_shape=(3,))
    with pytest.raises(NonDeterministicForward):
        _check(g)


def test_dropout_mask_frozen_during_check():
    # the frozen (seed, step) mask keeps the loss surface deterministic
    rng = np.random.default_rng(0)
    g = ModelGraph(
        [Dense(6, 6, rng=rng), Dropout(0.4, seed=3), Dense(6, 1, rng=rng)],
        input_shape=(6,),
    )
    assert _check(g) < TOL


def test_custom_loss_is_respected():
    def mae_loss(pred, target):
        diff = pred - target
        return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size

    g = ModelGraph([Dense(3, 2, rng=np.random.default_rng(4))], input_shape=(3,))
    assert _check(g, loss=mae_loss) < TOL


def test_parameters_restored_exactly():
    g = ModelGraph([Dense(5, 2, rng=np.random.default_rng(5))], input_shape=(5,))
    before = [arr.copy() for _, _, arr in g.parameters()]
    _check(g)
    for (_, _, arr), snap in zip(g.parameters(), before):
        np.testing.assert_array_equal(arr, snap)


class TestEveryLayerKind:
    """Each layer kind embedded in a minimal graph passes the check."""

    def test_conv(self):
        g = ModelGraph([Conv1D(2, 3, 3, rng=np.random.default_rng(0))],
                       input_shape=(7, 2))
        assert _check(g) < TOL

    def test_conv_strided(self):
        g = ModelGraph([Conv1D(2, 2, 3, stride=2, rng=np.random.default_rng(1))],
                       input_shape=(9, 2))
        assert _check(g) < TOL

    def test_maxpool(self):
        g = ModelGraph(
            [Conv1D(1, 2, 2, rng=np.random.default_rng(2)), MaxPool1D(2)],
            input_shape=(8, 1),
        )
        assert _check(g) < TOL

    def test_flatten_dense(self):
        g = ModelGraph(
            [Flatten(), Dense(12, 3, rng=np.random.default_rng(3))],
            input_shape=(4, 3),
        )
        assert _check(g) < TOL

    def test_relu(self):
        g = ModelGraph(
            [Dense(5, 5, rng=np.random.default_rng(4)), ReLU(),
             Dense(5, 2, rng=np.random.default_rng(5))],
            input_shape=(5,),
        )
        assert _check(g) < TOL

    def test_dropout(self):
        g = ModelGraph(
            [Dense(4, 4, rng=np.random.default_rng(6)), Dropout(0.5, seed=1),
             Dense(4, 1, rng=np.random.default_rng(7))],
            input_shape=(4,),
        )
        assert _check(g) < TOL

    def test_lstm(self):
        g = ModelGraph([LSTM(3, 4, rng=np.random.default_rng(8))],
                       input_shape=(6, 3))
        assert _check(g) < TOL

    def test_rnn(self):
        g = ModelGraph([RNN(3, 4, rng=np.random.default_rng(9))],
                       input_shape=(6, 3))
        assert _check(g) < TOL
