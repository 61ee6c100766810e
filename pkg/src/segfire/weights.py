"""Binary weights file.

Layout (all integers little-endian)::

    b"SEGW"  u32 version
    u32 height  u32 width  u32 channels
    u32 layer_count
    per layer:
        u8 kind (1 conv, 2 pool, 3 flatten, 4 dense)
        u16 name length, name bytes (utf-8)
        conv:  u32 k, c, kh, kw, stride; u8 activation
        pool:  u32 pool_size, stride; u8 mode
        dense: u32 n, m_o; u8 activation
    u64 payload byte count
    payload: f64 parameters in manifest order
    u64 checksum (blake2b-64 of the payload)
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError
from .nn import ConvLayer, DenseLayer, FlattenLayer, ModelGraph, PoolLayer
from .nn.layers import ACTIVATIONS, POOL_MODES

MAGIC = b"SEGW"
VERSION = 1
_KIND = {"conv": 1, "pool": 2, "flatten": 3, "dense": 4}


def payload_checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def encode_weights(model: ModelGraph) -> bytes:
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<3I", *model.input_shape),
           struct.pack("<I", len(model.layers))]
    for layer in model.layers:
        name = layer.name.encode("utf-8")
        out.append(struct.pack("<BH", _KIND[layer.kind], len(name)) + name)
        if layer.kind == "conv":
            out.append(struct.pack("<5IB", *layer.kernels.shape, layer.stride, ACTIVATIONS.index(layer.activation)))
        elif layer.kind == "pool":
            out.append(struct.pack("<2IB", layer.pool_size, layer.stride, POOL_MODES.index(layer.mode)))
        elif layer.kind == "dense":
            out.append(struct.pack("<2IB", *layer.weights.shape, ACTIVATIONS.index(layer.activation)))
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.parameters())
    out.append(struct.pack("<Q", len(payload)))
    out.append(payload)
    out.append(struct.pack("<Q", payload_checksum(payload)))
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"weights file truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _enum(values, index, what):
    if index >= len(values):
        raise FormatError(f"unknown {what} code {index}")
    return values[index]


def decode_weights(data: bytes) -> ModelGraph:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("not a weights file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"unsupported weights version {version}; expected {VERSION}")
    input_shape = r.unpack("<3I")
    (count,) = r.unpack("<I")
    specs = []
    for _ in range(count):
        kind, name_len = r.unpack("<BH")
        name = r.take(name_len).decode("utf-8")
        if kind == 1:
            k, c, kh, kw, stride, act = r.unpack("<5IB")
            specs.append(("conv", name, (k, c, kh, kw), stride, _enum(ACTIVATIONS, act, "activation")))
        elif kind == 2:
            size, stride, mode = r.unpack("<2IB")
            specs.append(("pool", name, size, stride, _enum(POOL_MODES, mode, "pool mode")))
        elif kind == 3:
            specs.append(("flatten", name))
        elif kind == 4:
            n, m, act = r.unpack("<2IB")
            specs.append(("dense", name, (n, m), _enum(ACTIVATIONS, act, "activation")))
        else:
            raise FormatError(f"unknown layer kind code {kind}")

    shapes = []
    for spec in specs:
        if spec[0] == "conv":
            shapes += [spec[2], (spec[2][0],)]
        elif spec[0] == "dense":
            shapes += [spec[2], (spec[2][1],)]
    expected = 8 * sum(int(np.prod(s)) for s in shapes)
    (declared,) = r.unpack("<Q")
    if declared != expected:
        raise FormatError(f"payload length {declared} disagrees with manifest ({expected} bytes)")
    payload = r.take(declared)
    (checksum,) = r.unpack("<Q")
    if checksum != payload_checksum(payload):
        raise FormatError("weights checksum mismatch")
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after checksum")

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    arrays, offset = [], 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(values[offset:offset + n].reshape(s).copy())
        offset += n
    it = iter(arrays)
    layers = []
    for spec in specs:
        if spec[0] == "conv":
            layers.append(ConvLayer(next(it), next(it), stride=spec[3], activation=spec[4], name=spec[1]))
        elif spec[0] == "pool":
            layers.append(PoolLayer(spec[2], spec[3], spec[4], name=spec[1]))
        elif spec[0] == "flatten":
            layers.append(FlattenLayer(name=spec[1]))
        else:
            layers.append(DenseLayer(next(it), next(it), activation=spec[3], name=spec[1]))
    return ModelGraph(layers, input_shape)


def save_weights(model: ModelGraph, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_weights(model))
    os.replace(tmp, path)
    return path


def load_weights(path) -> ModelGraph:
    return decode_weights(Path(path).read_bytes())
