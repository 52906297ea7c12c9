"""Sequential model graph: shape-checked construction, forward, backward.

The graph owns an ordered list of layers and the per-sample input shape.
Construction folds ``output_shape`` across the layers so incompatible
wiring fails before any data flows. ``forward`` returns the output plus a
cache object; ``backward`` only accepts the cache from the most recent
forward on the same graph (anything else raises StaleCache), which keeps
the forward/backward pairing honest when code interleaves calls.

Values are checked for NaN/Inf at every layer boundary; a violation
raises NonFiniteActivation naming the offending layer.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import (
    ConfigError,
    NonFiniteActivation,
    ShapeMismatch,
    StaleCache,
)
from .layers import layer_from_hyper

MODEL_FORMAT = "epfcast-model/1"


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(data).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(obj["shape"])


@dataclass
class ForwardCache:
    """Opaque record tying one forward pass to its backward pass."""

    graph_id: int
    token: object
    training: bool
    step: int
    layer_caches: List[Any]
    batch_shape: Tuple[int, ...]


class ModelGraph:
    """An ordered stack of layers with a fixed per-sample input shape."""

    def __init__(self, layers: Sequence, input_shape: Sequence[int], seed: int = 0):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.seed = int(seed)
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(tuple(layer.output_shape(shapes[-1])))
        self.layer_shapes = shapes
        self._live_token: Optional[object] = None

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return self.layer_shapes[-1]

    @property
    def n_params(self) -> int:
        return sum(p.size for _, _, p in self.parameters())

    def parameters(self) -> List[Tuple[int, str, np.ndarray]]:
        """Live (layer index, name, array) handles in deterministic order."""
        out = []
        for idx, layer in enumerate(self.layers):
            for name in layer.param_names:
                out.append((idx, name, layer.params[name]))
        return out

    def _check_finite(self, arr: np.ndarray, where: str) -> None:
        if not np.isfinite(arr).all():
            raise NonFiniteActivation(f"non-finite values at {where}")

    def forward(self, x, training: bool = False, step: int = 0):
        """Run the stack; returns (output, cache).

        The cache is valid until the next forward call on this graph.
        """
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != len(self.input_shape) + 1 or x.shape[1:] != self.input_shape:
            raise ShapeMismatch(
                f"expected batch of shape (*, {self.input_shape}), got {x.shape}"
            )
        self._check_finite(x, "model input")
        caches: List[Any] = []
        out = x
        for idx, layer in enumerate(self.layers):
            out, cache = layer.forward(out, training=training, step=step)
            self._check_finite(out, f"output of layer {idx} ({layer.kind})")
            caches.append(cache)
        token = object()
        self._live_token = token
        fc = ForwardCache(
            graph_id=id(self),
            token=token,
            training=training,
            step=step,
            layer_caches=caches,
            batch_shape=x.shape,
        )
        return out, fc

    def backward(self, cache: ForwardCache, dy):
        """Backpropagate dy through the stack.

        Returns (input gradient, per-layer gradient dicts). The cache must
        come from the most recent forward on this graph and is consumed.
        """
        if not isinstance(cache, ForwardCache) or cache.graph_id != id(self):
            raise StaleCache("cache does not belong to this graph")
        if self._live_token is None or cache.token is not self._live_token:
            raise StaleCache("cache is stale; run forward again before backward")
        self._live_token = None
        dy = np.ascontiguousarray(dy, dtype=np.float64)
        expected = (cache.batch_shape[0],) + self.output_shape
        if dy.shape != expected:
            raise ShapeMismatch(f"output grad shape {dy.shape}, expected {expected}")
        grads: List[dict] = [None] * len(self.layers)
        grad = dy
        for idx in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[idx].backward(grad, cache.layer_caches[idx])
            grads[idx] = layer_grads
        return grad, grads

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        """Inference forward in chunks; no cache survives the call."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[0] == 0:
            return np.zeros((0,) + self.output_shape, dtype=np.float64)
        outs = []
        for start in range(0, x.shape[0], batch_size):
            y, _ = self.forward(x[start:start + batch_size], training=False)
            outs.append(y)
        self._live_token = None
        return np.concatenate(outs, axis=0)

    def get_state(self) -> List[dict]:
        """Deep copies of every parameter array, aligned with the layers."""
        return [
            {name: layer.params[name].copy() for name in layer.param_names}
            for layer in self.layers
        ]

    def set_state(self, state: List[dict]) -> None:
        if len(state) != len(self.layers):
            raise ShapeMismatch("state does not match the layer list")
        for layer, entry in zip(self.layers, state):
            for name in layer.param_names:
                src = entry[name]
                if src.shape != layer.params[name].shape:
                    raise ShapeMismatch(
                        f"state shape {src.shape} does not match {layer.kind}.{name}"
                    )
                layer.params[name][...] = src
        self._live_token = None

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "seed": self.seed,
            "input_shape": list(self.input_shape),
            "layers": [
                {
                    "kind": layer.kind,
                    "hyper": layer.hyper(),
                    "params": {
                        name: _encode_array(layer.params[name])
                        for name in layer.param_names
                    },
                }
                for layer in self.layers
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelGraph":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT:
            raise ConfigError(
                f"unsupported model format {doc.get('format')!r}; expected {MODEL_FORMAT}"
            )
        layers = []
        for entry in doc["layers"]:
            layer = layer_from_hyper(entry["kind"], entry["hyper"])
            for name in layer.param_names:
                arr = _decode_array(entry["params"][name])
                if arr.shape != layer.params[name].shape:
                    raise ConfigError(
                        f"serialized {entry['kind']}.{name} has shape {arr.shape}, "
                        f"expected {layer.params[name].shape}"
                    )
                layer.params[name][...] = arr
            layers.append(layer)
        return cls(layers, doc["input_shape"], seed=doc.get("seed", 0))

    def summary(self) -> str:
        lines = [f"input  {self.input_shape}"]
        for layer, shape in zip(self.layers, self.layer_shapes[1:]):
            n = sum(layer.params[name].size for name in layer.param_names)
            lines.append(f"{layer.kind:<10} -> {shape}  params={n}")
        lines.append(f"total params: {self.n_params}")
        return "\n".join(lines)
