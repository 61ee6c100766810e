"""Ordered layer graph with reverse-mode gradients."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..exceptions import BuildError, InvalidInputError, InvalidStateError
from .layers import ConvLayer, DenseLayer, FlattenLayer, PoolLayer

_model_ids = itertools.count()


@dataclass
class Gradients:
    """One gradient array per parameter array, in ``ModelGraph.parameters()`` order."""

    names: List[str]
    tensors: List[np.ndarray]

    def __iter__(self):
        return iter(zip(self.names, self.tensors))

    def __getitem__(self, name):
        return self.tensors[self.names.index(name)]

    def is_zero(self):
        return all(not np.any(t) for t in self.tensors)


@dataclass
class ForwardCache:
    model_id: int
    version: int
    layer_caches: list
    batch_size: int
    consumed: bool = False


@dataclass(eq=False)
class ModelGraph:
    """An ordered stack of conv / pool / flatten / dense layers.

    ``input_shape`` is ``(height, width, channels)``.  Shapes are checked
    layer by layer on construction.
    """

    layers: list
    input_shape: tuple
    _id: int = field(default_factory=lambda: next(_model_ids), repr=False)
    _version: int = field(default=0, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise BuildError(f"input_shape must be (height, width, channels), got {self.input_shape}")
        self.shape_trace()

    def shape_trace(self):
        """Return the list of tensor shapes from the input through every layer."""
        shapes = [self.input_shape]
        for layer in self.layers:
            try:
                out = layer.output_shape(shapes[-1])
            except InvalidInputError as exc:
                raise BuildError(str(exc)) from exc
            if min(out) < 1:
                raise BuildError(f"{layer.name} produces an empty output {out}")
            shapes.append(tuple(out))
        return shapes

    @property
    def output_units(self):
        return self.shape_trace()[-1][0]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def parameter_names(self):
        names = []
        for layer in self.layers:
            if isinstance(layer, ConvLayer):
                names += [f"{layer.name}.kernels", f"{layer.name}.bias"]
            elif isinstance(layer, DenseLayer):
                names += [f"{layer.name}.weights", f"{layer.name}.bias"]
        return names

    def param_layers(self):
        return [layer for layer in self.layers if layer.params]

    def dense_layers(self):
        return [layer for layer in self.layers if isinstance(layer, DenseLayer)]

    def mark_modified(self):
        """Invalidate outstanding forward caches after a parameter change."""
        self._version += 1

    def copy(self):
        import copy
        clone = copy.deepcopy(self)
        clone._id = next(_model_ids)
        return clone


def _prepare_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or tuple(x.shape[1:]) != model.input_shape:
        raise InvalidInputError(f"input shape {x.shape[-3:] if x.ndim >= 3 else x.shape} does not match model input {model.input_shape}")
    return x, single


def forward_batch(model: ModelGraph, x):
    """Run an NHWC batch through ``model``; return ``(scores (B, units), cache)``."""
    x, _ = _prepare_input(model, x)
    caches = []
    out = x
    for layer in model.layers:
        out, cache = layer.forward(out)
        caches.append(cache)
    return out, ForwardCache(model._id, model._version, caches, x.shape[0])


def forward(model: ModelGraph, x):
    """Return ``(score, cache)``.

    A single ``(H, W, C)`` input yields a float score; a batch yields an
    array of shape ``(B,)`` (or ``(B, units)`` for multi-unit heads).
    """
    _, single = _prepare_input(model, x)
    out, cache = forward_batch(model, x)
    if out.shape[1] == 1:
        out = out[:, 0]
    if single:
        return (float(out[0]) if out.ndim == 1 else out[0]), cache
    return out, cache


def predict_scores(model: ModelGraph, x, batch_size=64):
    """Scores for a batch, evaluated in chunks to bound memory."""
    x = np.asarray(x)
    if x.ndim == 3:
        return forward(model, x)[0]
    chunks = []
    for start in range(0, len(x), batch_size):
        out, _ = forward_batch(model, x[start:start + batch_size])
        chunks.append(out[:, 0] if out.shape[1] == 1 else out)
    if not chunks:
        return np.zeros(0)
    return np.concatenate(chunks)


def backward(model: ModelGraph, cache: ForwardCache, loss_gradient) -> Gradients:
    """Exact gradients of a scalar loss given ``dL/dscores``."""
    if cache is None or not isinstance(cache, ForwardCache):
        raise InvalidStateError("backward needs the cache returned by forward")
    if cache.model_id != model._id or cache.version != model._version:
        raise InvalidStateError("forward cache is stale: the model changed after the forward pass")
    grad = np.asarray(loss_gradient, dtype=np.float64).reshape(cache.batch_size, -1)
    per_layer = []
    n = len(model.layers)
    for pos, layer, layer_cache in zip(range(n - 1, -1, -1), reversed(model.layers), reversed(cache.layer_caches)):
        grad, pgrads = layer.backward(grad, layer_cache, need_input_grad=pos > 0)
        per_layer.append(pgrads)
    tensors = [g for pgrads in reversed(per_layer) for g in pgrads]
    return Gradients(model.parameter_names(), tensors)


def activation_pattern(cache: ForwardCache):
    """The discrete branch choices (ReLU masks, pool argmaxes) of a forward pass."""
    parts = []
    for c in cache.layer_caches:
        if c.get("mask") is not None:
            parts.append(c["mask"])
        if "idx" in c:
            parts.append(c["idx"])
    return parts


__all__ = [
    "ConvLayer", "DenseLayer", "FlattenLayer", "PoolLayer", "ModelGraph", "Gradients",
    "forward", "forward_batch", "backward", "predict_scores", "activation_pattern",
]
