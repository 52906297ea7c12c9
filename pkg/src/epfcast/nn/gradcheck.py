"""Central-difference verification of analytic gradients.

This is the correctness oracle for every backward pass: wiggle each
parameter by +/- epsilon, difference the loss, and compare against the
analytic gradient under the relative-error metric

    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)

Forward passes run in training mode at a frozen step so dropout masks
are identical across evaluations; a double-forward probe guards against
any remaining nondeterminism before the slow part starts.
"""

from __future__ import annotations

from typing import Callable, Optional, Tuple

import numpy as np

from ..errors import NonDeterministicForward
from .graph import ModelGraph

LossFn = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]


def _mse(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    diff = pred - target
    n = diff.size
    return float(np.mean(diff * diff)), 2.0 * diff / n


def gradient_check(
    model: ModelGraph,
    x,
    targets,
    epsilon: float = 1e-5,
    loss: Optional[LossFn] = None,
    check_input: bool = False,
) -> float:
    """Max relative error between analytic and numeric gradients.

    Args:
        model: graph to check; its parameters are perturbed in place and
            restored exactly.
        x: input batch.
        targets: targets matching the model output shape.
        epsilon: finite-difference step, required within [1e-6, 1e-4].
        loss: callable (pred, target) -> (value, grad); squared-error
            mean by default.
        check_input: also verify the gradient with respect to the input.

    Raises:
        ValueError: epsilon outside the supported window.
        NonDeterministicForward: two identical forward passes disagreed.
    """
    if not 1e-6 <= epsilon <= 1e-4:
        raise ValueError(f"epsilon must lie in [1e-6, 1e-4], got {epsilon}")
    if loss is None:
        loss = _mse
    x = np.ascontiguousarray(x, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)

    y1, _ = model.forward(x, training=True, step=0)
    y2, cache = model.forward(x, training=True, step=0)
    if not np.array_equal(y1, y2):
        raise NonDeterministicForward(
            "two forward passes with identical inputs and step disagreed"
        )
    _, dy = loss(y2, targets)
    dx, grads = model.backward(cache, dy)

    def loss_at() -> float:
        out, _ = model.forward(x, training=True, step=0)
        return loss(out, targets)[0]

    worst = 0.0
    for idx, name, param in model.parameters():
        analytic = grads[idx][name].reshape(-1)
        flat = param.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            upper = loss_at()
            flat[j] = orig - epsilon
            lower = loss_at()
            flat[j] = orig
            numeric = (upper - lower) / (2.0 * epsilon)
            a = analytic[j]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel

    if check_input:
        flat_x = x.reshape(-1)
        flat_dx = dx.reshape(-1)
        for j in range(flat_x.size):
            orig = flat_x[j]
            flat_x[j] = orig + epsilon
            upper = loss_at()
            flat_x[j] = orig - epsilon
            lower = loss_at()
            flat_x[j] = orig
            numeric = (upper - lower) / (2.0 * epsilon)
            a = flat_dx[j]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel

    return worst
