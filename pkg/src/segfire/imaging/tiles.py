"""Exact rows x cols partition of a frame into tiles, and its inverse."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..exceptions import InvalidInputError
from .raster import RasterImage

ROWS, COLS = 3, 4


@dataclass
class SegmentGrid:
    """Tiles in row-major order; tile ``(r, c)`` sits at index ``r * cols + c``."""

    source_width: int
    source_height: int
    rows: int
    cols: int
    tiles: List[RasterImage]

    @property
    def tile_width(self):
        return self.source_width // self.cols

    @property
    def tile_height(self):
        return self.source_height // self.rows

    def tile(self, row, col):
        return self.tiles[row * self.cols + col]

    def __len__(self):
        return len(self.tiles)

    def as_array(self):
        """Stack the tiles into an ``(n, h, w, 3)`` uint8 array."""
        return np.stack([t.pixels for t in self.tiles])


def tile_bounds(index, rows=ROWS, cols=COLS, width=1280, height=720):
    """``(top, bottom, left, right)`` pixel bounds of tile ``index``."""
    r, c = divmod(index, cols)
    th, tw = height // rows, width // cols
    return r * th, (r + 1) * th, c * tw, (c + 1) * tw


def segment_array(pixels, rows=ROWS, cols=COLS):
    h, w = pixels.shape[:2]
    if rows < 1 or cols < 1:
        raise InvalidInputError("rows and cols must be >= 1")
    if w % cols or h % rows:
        raise InvalidInputError(f"{w}x{h} image does not split evenly into {cols}x{rows} tiles; resize first")
    th, tw = h // rows, w // cols
    # (rows, th, cols, tw, 3) -> (rows, cols, th, tw, 3)
    return pixels.reshape(rows, th, cols, tw, 3).swapaxes(1, 2).reshape(rows * cols, th, tw, 3)


def segment(image: RasterImage, rows=ROWS, cols=COLS) -> SegmentGrid:
    """Split ``image`` into ``rows * cols`` equal tiles without overlap."""
    parts = segment_array(image.pixels, rows, cols)
    return SegmentGrid(image.width, image.height, rows, cols, [RasterImage(p.copy()) for p in parts])


def reassemble(grid: SegmentGrid) -> RasterImage:
    """Inverse of :func:`segment`."""
    if len(grid.tiles) != grid.rows * grid.cols:
        raise InvalidInputError(f"grid has {len(grid.tiles)} tiles, expected {grid.rows * grid.cols}")
    th, tw = grid.tile_height, grid.tile_width
    for i, t in enumerate(grid.tiles):
        if (t.height, t.width) != (th, tw):
            raise InvalidInputError(f"tile {i} is {t.width}x{t.height}, expected {tw}x{th}")
    stack = np.stack([t.pixels for t in grid.tiles]).reshape(grid.rows, grid.cols, th, tw, 3)
    return RasterImage(stack.swapaxes(1, 2).reshape(grid.rows * th, grid.cols * tw, 3))


class TileSegmenter(TransformerMixin, BaseEstimator):
    """Transformer turning ``(n, H, W, 3)`` frames into ``(n * rows * cols, h, w, 3)`` tiles.

    Follows the scikit-learn transformer protocol so it can sit in front of
    :class:`segfire.estimator.SegNetClassifier` in a pipeline.
    """

    def __init__(self, rows=ROWS, cols=COLS):
        self.rows = rows
        self.cols = cols

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X)
        if X.ndim == 3:
            X = X[None]
        return np.concatenate([segment_array(frame, self.rows, self.cols) for frame in X])
