"""Separable bilinear and nearest-neighbour resampling."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError
from .raster import RasterImage

FILTERS = ("bilinear", "nearest")


def _source_coords(src, dst):
    # half-pixel centres: dst pixel i samples src position (i + 0.5) * src/dst - 0.5
    return (np.arange(dst) + 0.5) * (src / dst) - 0.5


def _bilinear_axis(arr, dst, axis):
    src = arr.shape[axis]
    if src == dst:
        return arr
    coords = np.clip(_source_coords(src, dst), 0, src - 1)
    lo = np.floor(coords).astype(np.intp)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    shape = [1] * arr.ndim
    shape[axis] = dst
    frac = frac.reshape(shape)
    return np.take(arr, lo, axis=axis) * (1.0 - frac) + np.take(arr, hi, axis=axis) * frac


def _nearest_axis(arr, dst, axis):
    src = arr.shape[axis]
    if src == dst:
        return arr
    idx = np.clip(np.floor((np.arange(dst) + 0.5) * (src / dst)).astype(np.intp), 0, src - 1)
    return np.take(arr, idx, axis=axis)


def resize_array(pixels, new_width, new_height, filter="bilinear"):
    """Resize an ``(H, W, ...)`` array.  uint8 input is rounded back to uint8."""
    if new_width < 1 or new_height < 1:
        raise InvalidInputError(f"target size must be positive, got {new_width}x{new_height}")
    if filter not in FILTERS:
        raise InvalidInputError(f"unknown filter {filter!r}; expected one of {FILTERS}")
    pixels = np.asarray(pixels)
    if filter == "nearest":
        return _nearest_axis(_nearest_axis(pixels, new_height, 0), new_width, 1)
    out = _bilinear_axis(_bilinear_axis(pixels.astype(np.float64), new_height, 0), new_width, 1)
    if pixels.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out


def resize(image: RasterImage, new_width, new_height, filter="bilinear") -> RasterImage:
    """Resample ``image`` to ``new_width x new_height``.  Same-size calls return an identical copy."""
    return RasterImage(np.array(resize_array(image.pixels, new_width, new_height, filter), dtype=np.uint8))
