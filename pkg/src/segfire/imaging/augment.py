"""Seeded photometric and geometric augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import RasterImage


@dataclass(frozen=True)
class AugmentationSpec:
    """Ranges the per-image parameters are drawn from.

    Each range is ``(low, high)``; a zero-width range at the identity value
    (0 degrees, 0 px, scale 1, brightness 0) disables that transform.
    ``fill`` is ``"black"`` or ``"edge"`` for pixels exposed by the
    geometric transform.
    """

    rotation: tuple = (0.0, 0.0)
    translation: tuple = (0.0, 0.0)
    scale: tuple = (1.0, 1.0)
    brightness: tuple = (0.0, 0.0)
    noise_sigma: float = 0.0
    fill: str = "black"
    seed: int = 0

    @classmethod
    def default(cls, seed=0):
        return cls(rotation=(-15.0, 15.0), translation=(-20.0, 20.0), scale=(0.9, 1.1),
                   brightness=(-20.0, 20.0), noise_sigma=4.0, seed=seed)


def _draw(rng, bounds):
    lo, hi = sorted(bounds)
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def _geometric(pixels, angle_deg, shift, scale, fill):
    h, w = pixels.shape[:2]
    theta = np.deg2rad(angle_deg)
    # output -> input mapping about the image centre
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]) / scale
    centre = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    offset = centre - rot @ (centre + np.asarray(shift))
    mode = "constant" if fill == "black" else "nearest"
    out = np.empty(pixels.shape, dtype=np.float64)
    for ch in range(pixels.shape[2]):
        out[..., ch] = ndimage.affine_transform(pixels[..., ch].astype(np.float64), rot, offset=offset,
                                                order=1, mode=mode, cval=0.0)
    return out


def augment_array(pixels, spec: AugmentationSpec):
    """Augment a ``(H, W, 3)`` uint8 array; output has the same shape and dtype."""
    rng = np.random.default_rng(spec.seed)
    angle = _draw(rng, spec.rotation)
    shift = (_draw(rng, spec.translation), _draw(rng, spec.translation))
    scale = max(_draw(rng, spec.scale), 1e-3)
    delta = _draw(rng, spec.brightness)
    sigma = max(float(spec.noise_sigma), 0.0)

    out = np.asarray(pixels)
    if angle != 0.0 or shift != (0.0, 0.0) or scale != 1.0:
        out = _geometric(out, angle, shift, scale, spec.fill)
    if delta != 0.0 or sigma > 0.0:
        out = out.astype(np.float64) + delta
        if sigma > 0.0:
            out = out + rng.normal(0.0, sigma, size=out.shape)
    if out.dtype != np.uint8:
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out.copy()


def augment(image: RasterImage, spec: AugmentationSpec) -> RasterImage:
    return RasterImage(augment_array(image.pixels, spec))
