"""Layer types and their forward/backward kernels.

All tensors are float64 numpy arrays in NHWC order.  Every ``forward``
returns ``(output, cache)`` and the matching ``backward`` consumes that
cache and returns ``(grad_input, param_grads)`` where ``param_grads`` is
aligned with ``layer.params``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import InvalidInputError

ACTIVATIONS = ("relu", "linear")
POOL_MODES = ("downsample", "preserve")


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Return ``(out, pad_before, pad_after)`` for SAME padding along one axis.

    The output length is ``ceil(size / stride)``; the total pad is split with
    the smaller half first.
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _check_activation(name):
    if name not in ACTIVATIONS:
        raise InvalidInputError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


def _scatter_windows(grad_padded, contrib, offset, stride, out_h, out_w):
    i, j = offset
    grad_padded[:, i:i + stride * (out_h - 1) + 1:stride,
                j:j + stride * (out_w - 1) + 1:stride, :] += contrib


@dataclass(eq=False)
class ConvLayer:
    """2-D convolution with SAME padding.

    ``kernels`` has shape ``(k, c, kh, kw)`` and ``bias`` shape ``(k,)``.
    """

    kernels: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: str = "same"
    activation: str = "relu"
    name: str = "conv"
    kind = "conv"

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernels.ndim != 4 or min(self.kernels.shape) < 1:
            raise InvalidInputError(f"kernels must be a non-empty (k, c, kh, kw) array, got {self.kernels.shape}")
        if self.kernels.shape[2] != self.kernels.shape[3]:
            raise InvalidInputError("kernels must be square")
        if self.bias.shape != (self.kernels.shape[0],):
            raise InvalidInputError(f"bias shape {self.bias.shape} does not match {self.kernels.shape[0]} kernels")
        if self.stride < 1:
            raise InvalidInputError("stride must be >= 1")
        if self.padding != "same":
            raise InvalidInputError("only SAME padding is supported")
        _check_activation(self.activation)

    @property
    def params(self):
        return [self.kernels, self.bias]

    @property
    def filters(self):
        return self.kernels.shape[0]

    @property
    def kernel_size(self):
        return self.kernels.shape[2]

    def param_count(self):
        k, c, kh, kw = self.kernels.shape
        return k * (c * kh * kw + 1)

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.kernels.shape[1]:
            raise InvalidInputError(f"{self.name}: input has {c} channels, kernels expect {self.kernels.shape[1]}")
        out_h = same_padding(h, self.kernel_size, self.stride)[0]
        out_w = same_padding(w, self.kernel_size, self.stride)[0]
        return (out_h, out_w, self.filters)

    def forward(self, x):
        b, h, w, c = x.shape
        k, kc, ks, _ = self.kernels.shape
        if c != kc:
            raise InvalidInputError(f"{self.name}: input has {c} channels, kernels expect {kc}")
        s = self.stride
        out_h, top, bottom = same_padding(h, ks, s)
        out_w, left, right = same_padding(w, ks, s)
        padded = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
        windows = sliding_window_view(padded, (ks, ks), axis=(1, 2))[:, ::s, ::s][:, :out_h, :out_w]
        cols = windows.reshape(b * out_h * out_w, c * ks * ks)
        z = cols @ self.kernels.reshape(k, -1).T
        z += self.bias
        z = z.reshape(b, out_h, out_w, k)
        if self.activation == "relu":
            mask = z > 0
            out = z * mask
        else:
            mask = None
            out = z
        cache = {"cols": cols, "mask": mask, "x_shape": x.shape,
                 "pads": (top, bottom, left, right), "out_hw": (out_h, out_w)}
        return out, cache

    def backward(self, dout, cache, need_input_grad=True):
        k, c, ks, _ = self.kernels.shape
        s = self.stride
        b, h, w, _ = cache["x_shape"]
        out_h, out_w = cache["out_hw"]
        top, bottom, left, right = cache["pads"]
        dz = dout if cache["mask"] is None else dout * cache["mask"]
        dz2 = dz.reshape(-1, k)
        d_kernels = (dz2.T @ cache["cols"]).reshape(self.kernels.shape)
        d_bias = dz2.sum(axis=0)
        if not need_input_grad:
            return None, [d_kernels, d_bias]
        dcols = (dz2 @ self.kernels.reshape(k, -1)).reshape(b, out_h, out_w, c, ks, ks)
        dpad = np.zeros((b, h + top + bottom, w + left + right, c))
        for i in range(ks):
            for j in range(ks):
                _scatter_windows(dpad, dcols[..., i, j], (i, j), s, out_h, out_w)
        dx = dpad[:, top:top + h, left:left + w, :]
        return dx, [d_kernels, d_bias]


@dataclass(eq=False)
class PoolLayer:
    """Max pooling.

    ``downsample`` slides a ``pool_size`` window with ``stride`` over the
    unpadded input.  ``preserve`` pads bottom/right with ``-inf`` and uses
    stride 1 so the spatial dims are unchanged.
    """

    pool_size: int = 2
    stride: int = 2
    mode: str = "downsample"
    name: str = "pool"
    kind = "pool"

    def __post_init__(self):
        if self.mode not in POOL_MODES:
            raise InvalidInputError(f"unknown pool mode {self.mode!r}; expected one of {POOL_MODES}")
        if self.pool_size < 1 or self.stride < 1:
            raise InvalidInputError("pool_size and stride must be >= 1")
        if self.mode == "preserve":
            self.stride = 1

    @property
    def params(self):
        return []

    def param_count(self):
        return 0

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if self.mode == "preserve":
            return (h, w, c)
        if h < self.pool_size or w < self.pool_size:
            raise InvalidInputError(f"{self.name}: input {h}x{w} is smaller than the {self.pool_size}x{self.pool_size} window")
        return ((h - self.pool_size) // self.stride + 1, (w - self.pool_size) // self.stride + 1, c)

    def _geometry(self, h, w):
        p = self.pool_size
        if self.mode == "preserve":
            _, top, bottom = same_padding(h, p, 1)
            _, left, right = same_padding(w, p, 1)
            return h, w, (top, bottom, left, right)
        out_h, out_w, _ = self.output_shape((h, w, 1))
        return out_h, out_w, (0, 0, 0, 0)

    def _strided_forward(self, x, out_h, out_w):
        # one strided view per window offset; cheaper than materialising windows
        p, s = self.pool_size, self.stride
        best = idx = None
        for o in range(p * p):
            i, j = divmod(o, p)
            view = x[:, i:i + s * (out_h - 1) + 1:s, j:j + s * (out_w - 1) + 1:s, :]
            if best is None:
                best = view.copy()
                idx = np.zeros(best.shape, dtype=np.intp)
            else:
                better = view > best
                np.copyto(best, view, where=better)
                idx[better] = o
        return best, idx

    def forward(self, x):
        b, h, w, c = x.shape
        out_h, out_w, pads = self._geometry(h, w)
        top, bottom, left, right = pads
        if any(pads):
            x = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)), constant_values=-np.inf)
        out, idx = self._strided_forward(x, out_h, out_w)
        return out, {"idx": idx, "x_shape": (b, h, w, c), "pads": pads, "out_hw": (out_h, out_w)}

    def backward(self, dout, cache, need_input_grad=True):
        if not need_input_grad:
            return None, []
        b, h, w, c = cache["x_shape"]
        top, bottom, left, right = cache["pads"]
        out_h, out_w = cache["out_hw"]
        p, s = self.pool_size, self.stride
        idx = cache["idx"]
        dpad = np.zeros((b, h + top + bottom, w + left + right, c))
        for o in range(p * p):
            _scatter_windows(dpad, dout * (idx == o), divmod(o, p), s, out_h, out_w)
        return dpad[:, top:top + h, left:left + w, :], []


@dataclass(eq=False)
class FlattenLayer:
    name: str = "flatten"
    kind = "flatten"

    @property
    def params(self):
        return []

    def param_count(self):
        return 0

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), {"x_shape": x.shape}

    def backward(self, dout, cache, need_input_grad=True):
        return dout.reshape(cache["x_shape"]), []


@dataclass(eq=False)
class DenseLayer:
    """Affine map ``x @ weights + bias`` with optional ReLU.

    ``weights`` has shape ``(n, m_o)``.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"
    name: str = "dense"
    kind = "dense"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or min(self.weights.shape) < 1:
            raise InvalidInputError(f"weights must be a non-empty (n, m_o) array, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise InvalidInputError(f"bias shape {self.bias.shape} does not match {self.weights.shape[1]} units")
        _check_activation(self.activation)

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def units(self):
        return self.weights.shape[1]

    def param_count(self):
        n, m = self.weights.shape
        return n * m + m

    def output_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.weights.shape[0]:
            raise InvalidInputError(f"{self.name}: expected input of length {self.weights.shape[0]}, got shape {tuple(in_shape)}")
        return (self.units,)

    def forward(self, x):
        if x.shape[1] != self.weights.shape[0]:
            raise InvalidInputError(f"{self.name}: expected input of length {self.weights.shape[0]}, got {x.shape[1]}")
        z = x @ self.weights + self.bias
        if self.activation == "relu":
            mask = z > 0
            return z * mask, {"x": x, "mask": mask}
        return z, {"x": x, "mask": None}

    def backward(self, dout, cache, need_input_grad=True):
        dz = dout if cache["mask"] is None else dout * cache["mask"]
        x = cache["x"]
        if not need_input_grad:
            return None, [x.T @ dz, dz.sum(axis=0)]
        return dz @ self.weights.T, [x.T @ dz, dz.sum(axis=0)]


def _as_batch(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim:
        return x[None], True
    if x.ndim == ndim + 1:
        return x, False
    raise InvalidInputError(f"expected a {ndim}-d tensor or a batch of them, got shape {x.shape}")


def conv2d_forward(x, layer: ConvLayer):
    """Apply ``layer`` to a single ``(H, W, C)`` tensor or an NHWC batch."""
    xb, single = _as_batch(x, 3)
    out, _ = layer.forward(xb)
    return out[0] if single else out


def maxpool2d_forward(x, layer: PoolLayer):
    """Return ``(pooled, argmax_indices)``; indices are flat offsets in each window."""
    xb, single = _as_batch(x, 3)
    h, w = xb.shape[1:3]
    if layer.mode == "downsample" and (h < layer.pool_size or w < layer.pool_size):
        raise InvalidInputError(f"input {h}x{w} is smaller than the pooling window")
    out, cache = layer.forward(xb)
    if single:
        return out[0], cache["idx"][0]
    return out, cache["idx"]


def dense_forward(x, layer: DenseLayer):
    xb, single = _as_batch(x, 1)
    out, _ = layer.forward(xb)
    return out[0] if single else out
