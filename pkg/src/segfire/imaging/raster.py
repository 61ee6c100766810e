"""8-bit RGB rasters and binary PPM (P6) I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import FormatError, InvalidInputError

_WHITESPACE = b" \t\r\n"


@dataclass(eq=False)
class RasterImage:
    """Row-major RGB image backed by a ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError(f"pixels must have shape (height, width, 3), got {px.shape}")
        if px.dtype != np.uint8:
            raise InvalidInputError(f"pixels must be uint8, got {px.dtype}")
        self.pixels = np.ascontiguousarray(px)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width, height, color=(0, 0, 0)):
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = color
        return cls(px)

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"RasterImage({self.width}x{self.height})"


def to_tensor(image) -> np.ndarray:
    """Float64 ``(H, W, 3)`` tensor with values ``byte / 255``."""
    px = image.pixels if isinstance(image, RasterImage) else np.asarray(image)
    return px.astype(np.float64) / 255.0


def _read_token(data, pos):
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated PPM header")
    return data[start:pos], pos


def decode_ppm(data: bytes) -> RasterImage:
    if data[:2] != b"P6":
        raise FormatError(f"unsupported format {data[:2]!r}; only binary P6 pixmaps are read")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"malformed PPM header field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"invalid PPM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is supported")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after PPM header")
    pos += 1
    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise FormatError(f"truncated PPM payload: {len(payload)} of {expected} bytes")
    return RasterImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy())


def encode_ppm(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def load_image(path) -> RasterImage:
    """Read a raster.  ``.ppm`` files use the built-in lossless codec; other
    extensions go through Pillow."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm", ""):
        return decode_ppm(path.read_bytes())
    from PIL import Image

    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_image(image: RasterImage, path):
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm", ""):
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(encode_ppm(image))
        os.replace(tmp, path)
        return path
    from PIL import Image

    Image.fromarray(image.pixels).save(path)
    return path
