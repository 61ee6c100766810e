"""Procedural aerial forest scenes with optional fire and look-alike distractors.

Scenes are reproducible from ``(GENERATOR_VERSION, seed)``.  Bump the
version whenever the rendering changes so old datasets stay identifiable.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError
from .raster import RasterImage
from .resize import resize_array

GENERATOR_VERSION = 1
DISTRACTORS = ("none", "fog", "fall_foliage")

_FIRE_RAMP = np.array([[200.0, 45.0, 10.0], [255.0, 140.0, 20.0], [255.0, 235.0, 130.0]])
_FOG = np.array([205.0, 208.0, 212.0])


def scene_rng(seed, *extra):
    return np.random.default_rng([GENERATOR_VERSION, int(seed) & 0xFFFFFFFF, *extra])


def _smooth_noise(rng, height, width, cell, channels=1):
    coarse = rng.random((height // cell + 2, width // cell + 2, channels))
    return resize_array(coarse, width, height)


def forest_background(rng, width, height):
    """Float ``(H, W, 3)`` canopy texture seen from above."""
    patches = _smooth_noise(rng, height, width, 48)
    crowns = _smooth_noise(rng, height, width, 10)
    dark = np.array([22.0, 55.0, 24.0])
    canopy = np.array([45.0, 110.0, 40.0])
    clearing = np.array([95.0, 90.0, 55.0])
    img = dark + crowns * (canopy - dark)
    open_ground = np.clip((patches - 0.72) / 0.15, 0.0, 1.0)
    img = img * (1 - open_ground) + clearing * open_ground
    img += rng.normal(0.0, 6.0, size=img.shape)
    return img


def _blob_field(rng, height, width, cy, cx, radius, lobes=(4, 9)):
    """Sum of gaussian lobes around ``(cy, cx)``, normalised to peak 1, and its bbox."""
    n = int(rng.integers(*lobes))
    offsets = rng.normal(0.0, 0.4 * radius, size=(n, 2))
    sigmas = rng.uniform(0.3 * radius, 0.6 * radius, size=n)
    reach = int(np.ceil(2.2 * radius))
    top, bottom = max(0, int(cy) - reach), min(height, int(cy) + reach + 1)
    left, right = max(0, int(cx) - reach), min(width, int(cx) + reach + 1)
    if top >= bottom or left >= right:
        return None, None
    yy, xx = np.mgrid[top:bottom, left:right].astype(np.float64)
    field = np.zeros(yy.shape)
    for (dy, dx), sig in zip(offsets, sigmas):
        field += np.exp(-((yy - cy - dy) ** 2 + (xx - cx - dx) ** 2) / (2 * sig ** 2))
    peak = field.max()
    if peak > 0:
        field /= peak
    return field, (top, bottom, left, right)


def render_smoke(img, rng, cy, cx, radius):
    h, w = img.shape[:2]
    drift = rng.normal(0.0, 0.5 * radius)
    field, box = _blob_field(rng, h, w, cy - 1.6 * radius, cx + drift, 1.3 * radius, lobes=(3, 6))
    if field is None:
        return img
    top, bottom, left, right = box
    alpha = (0.5 * np.clip((field - 0.25) / 0.5, 0.0, 1.0))[..., None]
    grey = rng.uniform(140.0, 185.0)
    region = img[top:bottom, left:right]
    img[top:bottom, left:right] = region * (1 - alpha) + grey * alpha
    return img


def render_fire(img, rng, cy, cx, radius, smoke=True):
    """Paint one amorphous flame cluster (and optionally its smoke) onto a float image in place."""
    if smoke:
        render_smoke(img, rng, cy, cx, radius)
    h, w = img.shape[:2]
    field, box = _blob_field(rng, h, w, cy, cx, radius)
    if field is None:
        return img
    top, bottom, left, right = box
    heat = np.clip((field - 0.35) / 0.65 + rng.normal(0.0, 0.06, size=field.shape), 0.0, 1.0)
    # piecewise-linear ramp red -> orange -> yellow
    lo = np.minimum(heat * 2, 1.0)[..., None]
    hi = np.maximum(heat * 2 - 1, 0.0)[..., None]
    color = _FIRE_RAMP[0] + lo * (_FIRE_RAMP[1] - _FIRE_RAMP[0]) + hi * (_FIRE_RAMP[2] - _FIRE_RAMP[1])
    alpha = np.clip((field - 0.3) / 0.1, 0.0, 1.0)[..., None]
    region = img[top:bottom, left:right]
    img[top:bottom, left:right] = region * (1 - alpha) + color * alpha
    return img


def render_fog(img, rng):
    h, w = img.shape[:2]
    haze = _smooth_noise(rng, h, w, 64)
    alpha = 0.35 + 0.35 * haze
    return img * (1 - alpha) + _FOG * alpha


def render_foliage(img, rng):
    """Red-orange autumn canopy patches: warm but darker and less saturated than flame."""
    h, w = img.shape[:2]
    scale = min(h, w)
    crowns = _smooth_noise(rng, h, w, 8)
    for _ in range(int(rng.integers(2, 7))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        field, box = _blob_field(rng, h, w, cy, cx, rng.uniform(0.06, 0.2) * scale)
        if field is None:
            continue
        top, bottom, left, right = box
        base = np.array([rng.uniform(150, 190), rng.uniform(45, 85), rng.uniform(18, 40)])
        texture = 0.7 + 0.3 * crowns[top:bottom, left:right]
        alpha = np.clip((field - 0.3) / 0.15, 0.0, 1.0)[..., None]
        region = img[top:bottom, left:right]
        img[top:bottom, left:right] = region * (1 - alpha) + base * texture * alpha
    return img


def finish(img) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def fire_radius_range(width, height):
    s = min(width, height)
    return 0.07 * s, 0.16 * s


def generate_scene(seed, with_fire, distractor="none", width=1280, height=720):
    """Return ``(RasterImage, label)`` for one seeded scene.

    Fire scenes carry one to three flame clusters with smoke at random
    positions and sizes; distractors add fog haze or autumn foliage.
    """
    if distractor not in DISTRACTORS:
        raise InvalidInputError(f"unknown distractor {distractor!r}; expected one of {DISTRACTORS}")
    rng = scene_rng(seed, int(bool(with_fire)), DISTRACTORS.index(distractor))
    img = forest_background(rng, width, height)
    if distractor == "fall_foliage":
        img = render_foliage(img, rng)
    elif distractor == "fog":
        img = render_fog(img, rng)
    if with_fire:
        r_lo, r_hi = fire_radius_range(width, height)
        for _ in range(int(rng.integers(1, 4))):
            radius = rng.uniform(r_lo, r_hi)
            margin = 0.5 * radius
            cy = rng.uniform(margin, height - margin)
            cx = rng.uniform(margin, width - margin)
            render_fire(img, rng, cy, cx, radius)
    return RasterImage(finish(img)), ("fire" if with_fire else "nonfire")


def fire_pixel_mask(pixels):
    """Bright flame-coloured pixels: strong red, some green, little blue."""
    px = np.asarray(pixels).astype(np.int32)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    return (r >= 220) & (g >= 80) & (b <= 140) & (r - b >= 120)


def generate_dataset(count, fire_ratio=0.5, seed=0, width=320, height=240,
                     distractor_weights=(0.5, 0.25, 0.25)):
    """Build ``count`` labelled scenes.

    Exactly ``round(fire_ratio * count)`` scenes contain fire; their order
    and the distractor of every scene are drawn from ``seed``.  Returns
    ``(images uint8 (n, H, W, 3), labels, distractors)``.
    """
    if count < 0:
        raise InvalidInputError("count must be >= 0")
    if not 0 <= fire_ratio <= 1:
        raise InvalidInputError("fire_ratio must be in [0, 1]")
    rng = scene_rng(seed, 0xD5)
    n_fire = int(round(fire_ratio * count))
    has_fire = np.zeros(count, dtype=bool)
    has_fire[:n_fire] = True
    rng.shuffle(has_fire)
    weights = np.asarray(distractor_weights, dtype=np.float64)
    kinds = rng.choice(len(DISTRACTORS), size=count, p=weights / weights.sum())
    scene_seeds = rng.integers(0, 2 ** 32, size=count)
    images = np.empty((count, height, width, 3), dtype=np.uint8)
    labels, distractors = [], []
    for i in range(count):
        image, label = generate_scene(int(scene_seeds[i]), bool(has_fire[i]), DISTRACTORS[kinds[i]], width, height)
        images[i] = image.pixels
        labels.append(label)
        distractors.append(DISTRACTORS[kinds[i]])
    return images, labels, distractors
