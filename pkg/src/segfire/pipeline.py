"""Frame-stream detection workflow.

Every ``keep_every``-th frame is cut into twelve tiles and each tile is
classified.  The count of fire tiles picks the action: none continues,
one triggers a second look at that tile alone, two or more raise an alert.
The second look upscales the flagged tile to full frame size, re-runs the
twelve-tile pass on it and confirms the detection when at least two
sub-tiles fire; a confirmed second look escalates to an alert.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np

from .exceptions import InvalidInputError, PipelineError
from .imaging import RasterImage, load_image, resize_array, segment_array
from .imaging.synth import finish, forest_background, render_fire, scene_rng
from .imaging.tiles import COLS, ROWS, tile_bounds
from .model import as_float_batch
from .nn import ModelGraph, predict_scores

log = logging.getLogger(__name__)

FRAME_WIDTH, FRAME_HEIGHT = 1280, 720
N_TILES = ROWS * COLS

CONTINUE, REPROCESS, ALERT = "continue", "reprocess", "alert"
# event actions as logged; a second look is logged as "reprocessed"
REPROCESSED = "reprocessed"
_RANK = {CONTINUE: 0, REPROCESS: 1, ALERT: 2}


@dataclass(frozen=True)
class SamplerConfig:
    keep_every: int = 20
    fps: int = 60

    def __post_init__(self):
        if self.keep_every < 1 or self.fps < 1:
            raise InvalidInputError("keep_every and fps must be >= 1")

    @property
    def effective_rate(self) -> float:
        return self.fps / self.keep_every


@dataclass(frozen=True)
class Frame:
    index: int
    image: RasterImage
    ref: str


class FrameStream:
    """Ordered frames, indexed from 0.

    ``sources`` may hold images or file paths; paths are decoded lazily so
    skipped frames are never read.
    """

    def __init__(self, sources: Sequence[Union[RasterImage, str, Path]], fps: int = 60, refs=None):
        if fps < 1:
            raise InvalidInputError("fps must be >= 1")
        self.sources = list(sources)
        self.fps = fps
        if refs is None:
            refs = [str(s) if isinstance(s, (str, Path)) else f"frame-{i:06d}" for i, s in enumerate(self.sources)]
        if len(refs) != len(self.sources):
            raise InvalidInputError("one reference per frame is required")
        self.refs = list(refs)

    def __len__(self):
        return len(self.sources)

    def frame(self, index) -> Frame:
        src = self.sources[index]
        image = src if isinstance(src, RasterImage) else load_image(src)
        return Frame(index, image, self.refs[index])

    def __iter__(self):
        for i in range(len(self)):
            yield self.frame(i)

    @classmethod
    def from_directory(cls, path, fps: int = 60):
        """Frames from files whose stems are zero-padded frame numbers, e.g. ``000020.ppm``."""
        path = Path(path)
        if not path.is_dir():
            raise InvalidInputError(f"{path} is not a directory")
        files = sorted((p for p in path.iterdir() if p.is_file() and re.fullmatch(r"\d+", p.stem)),
                       key=lambda p: int(p.stem))
        numbers = [int(p.stem) for p in files]
        if numbers != list(range(len(files))):
            raise InvalidInputError(f"frame files in {path} must be numbered 0, 1, 2, ... without gaps")
        return cls(files, fps=fps, refs=[p.name for p in files])


def sample_frames(stream: FrameStream, config: SamplerConfig = SamplerConfig()) -> List[Frame]:
    return [stream.frame(i) for i in range(0, len(stream), config.keep_every)]


def sampled_indices(n_frames: int, keep_every: int) -> List[int]:
    return list(range(0, n_frames, keep_every))


@dataclass(frozen=True)
class DecisionArray:
    """Per-tile fire verdicts in row-major tile order, with their scores."""

    verdicts: tuple
    scores: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "verdicts", tuple(bool(v) for v in self.verdicts))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if self.scores and len(self.scores) != len(self.verdicts):
            raise InvalidInputError("scores and verdicts differ in length")

    @classmethod
    def from_scores(cls, scores):
        scores = [float(s) for s in scores]
        return cls(tuple(s >= 0.0 for s in scores), tuple(scores))

    @property
    def fire_count(self) -> int:
        return sum(self.verdicts)

    @property
    def fire_tiles(self) -> List[int]:
        return [i for i, v in enumerate(self.verdicts) if v]

    def __len__(self):
        return len(self.verdicts)


@dataclass(frozen=True)
class Decision:
    action: str
    tile: Optional[int] = None


def decide(array: DecisionArray) -> Decision:
    count = array.fire_count
    if count == 0:
        return Decision(CONTINUE)
    if count == 1:
        return Decision(REPROCESS, array.fire_tiles[0])
    return Decision(ALERT)


def action_rank(action: str) -> int:
    return _RANK[action]


class TileScorer:
    """Maps uint8 tiles ``(n, h, w, 3)`` to one score per tile."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, tiles):
        return np.asarray(self.fn(tiles), dtype=np.float64).reshape(-1)


def tile_scorer(model) -> TileScorer:
    """Adapt a ModelGraph, an estimator with ``decision_function`` or a plain callable."""
    if isinstance(model, TileScorer):
        return model
    if isinstance(model, ModelGraph):
        return TileScorer(lambda tiles: predict_scores(model, as_float_batch(tiles)))
    if hasattr(model, "decision_function"):
        return TileScorer(model.decision_function)
    if callable(model):
        return TileScorer(model)
    raise InvalidInputError(f"cannot score tiles with {type(model).__name__}")


def _frame_pixels(frame) -> np.ndarray:
    pixels = frame.pixels if isinstance(frame, RasterImage) else np.asarray(frame, dtype=np.uint8)
    h, w = pixels.shape[:2]
    if (w, h) != (FRAME_WIDTH, FRAME_HEIGHT):
        log.info("resizing %dx%d frame to %dx%d", w, h, FRAME_WIDTH, FRAME_HEIGHT)
        pixels = resize_array(pixels, FRAME_WIDTH, FRAME_HEIGHT)
    return pixels


def evaluate_frame(frame, model) -> DecisionArray:
    """Segment a frame into twelve tiles and classify each one."""
    scorer = tile_scorer(model)
    tiles = segment_array(_frame_pixels(frame))
    return DecisionArray.from_scores(scorer(tiles))


def upscale_tile(frame, tile_index: int) -> np.ndarray:
    if not 0 <= tile_index < N_TILES:
        raise InvalidInputError(f"tile index {tile_index} outside [0, {N_TILES})")
    top, bottom, left, right = tile_bounds(tile_index)
    tile = _frame_pixels(frame)[top:bottom, left:right]
    return resize_array(tile, FRAME_WIDTH, FRAME_HEIGHT)


def reprocess(frame, tile_index: int, model):
    """Take a second look at one tile; return ``(confirmed, sub_array)``."""
    sub = evaluate_frame(upscale_tile(frame, tile_index), model)
    return sub.fire_count >= 2, sub


@dataclass
class PipelineEvent:
    frame: int
    timestamp: float
    action: str
    decision: DecisionArray
    tile: Optional[int] = None
    confirmed: Optional[bool] = None
    alert: bool = False
    image_ref: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "frame": self.frame,
            "timestamp": round(self.timestamp, 6),
            "action": self.action,
            "tile": self.tile,
            "confirmed": self.confirmed,
            "alert": self.alert,
            "image_ref": self.image_ref,
            "verdicts": [int(v) for v in self.decision.verdicts],
            "scores": [round(s, 6) for s in self.decision.scores],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


class ListSink:
    def __init__(self):
        self.events: List[PipelineEvent] = []

    def emit(self, event: PipelineEvent):
        self.events.append(event)


class JsonlSink:
    """Appends one JSON record per event to a file, flushing after each."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = None

    def emit(self, event: PipelineEvent):
        if self._fh is None:
            self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(event.to_json() + "\n")
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def process_frame(frame: Frame, scorer, fps: int) -> PipelineEvent:
    decision_array = evaluate_frame(frame.image, scorer)
    decision = decide(decision_array)
    event = PipelineEvent(frame.index, frame.index / fps, decision.action, decision_array)
    if decision.action == REPROCESS:
        confirmed, _ = reprocess(frame.image, decision.tile, scorer)
        event.action, event.tile, event.confirmed = REPROCESSED, decision.tile, confirmed
        event.alert = confirmed
    elif decision.action == ALERT:
        event.alert = True
    if event.alert:
        event.image_ref = frame.ref
    return event


def run_pipeline(stream: FrameStream, model, sampler: SamplerConfig = None, sink=None) -> List[PipelineEvent]:
    """Process the sampled frames in order; return the event log.

    Every sampled frame yields exactly one event.  Events are handed to
    ``sink.emit`` as they are produced; a failing sink raises
    :class:`PipelineError` carrying the undelivered event.
    """
    sampler = sampler or SamplerConfig(fps=stream.fps)
    scorer = tile_scorer(model)
    events = []
    for index in range(0, len(stream), sampler.keep_every):
        event = process_frame(stream.frame(index), scorer, sampler.fps)
        events.append(event)
        if sink is not None:
            try:
                sink.emit(event)
            except Exception as exc:
                raise PipelineError(f"sink failed on frame {event.frame}: {exc}", pending_event=event) from exc
    return events


def write_event_log(events: Iterable[PipelineEvent], path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(e.to_json() + "\n" for e in events), encoding="utf-8")
    os.replace(tmp, path)
    return path


# -- scripted stream ---------------------------------------------------------

@dataclass(frozen=True)
class FireSchedule:
    """Which tiles burn from which frame onwards."""

    start_frame: int
    tiles: tuple


DEFAULT_SCHEDULE = (FireSchedule(20, (5,)), FireSchedule(40, (5, 6)))


def _burning_tile(img, rng, tile_index):
    """Paint a cluster of small flames spread over one tile, confined to it.

    The flames sit in separate sub-regions so that the tile, once upscaled
    to frame size, shows several flame clusters of ordinary size.
    """
    top, bottom, left, right = tile_bounds(tile_index)
    view = img[top:bottom, left:right]
    th, tw = view.shape[:2]
    for cy, cx in ((0.3, 0.3), (0.35, 0.72), (0.72, 0.5)):
        radius = rng.uniform(0.09, 0.11) * th
        render_fire(view, rng, cy * th, cx * tw, radius)
    return img


def scripted_stream(n_frames: int = 60, seed: int = 0, schedule=DEFAULT_SCHEDULE, fps: int = 60) -> FrameStream:
    """A deterministic synthetic stream over a static forest.

    With the default schedule one tile catches fire at frame 20 and a second
    tile at frame 40.  Only the fire state changes between frames, so the
    frames can be rendered once per fire state.
    """
    base = forest_background(scene_rng(seed, 0xF5), FRAME_WIDTH, FRAME_HEIGHT)
    states = {}
    frames = []
    for i in range(n_frames):
        burning = ()
        for step in schedule:
            if i >= step.start_frame:
                burning = tuple(step.tiles)
        if burning not in states:
            img = base.copy()
            for t in burning:
                _burning_tile(img, scene_rng(seed, 0xF6, t), t)
            states[burning] = RasterImage(finish(img))
        frames.append(states[burning])
    return FrameStream(frames, fps=fps)


def expected_trace(n_frames: int, keep_every: int, schedule=DEFAULT_SCHEDULE):
    """Actions implied by the decision rule for a perfectly accurate classifier.

    Single burning tiles are assumed to be confirmed on the second look.
    """
    out = []
    for i in sampled_indices(n_frames, keep_every):
        burning = ()
        for step in schedule:
            if i >= step.start_frame:
                burning = tuple(step.tiles)
        if not burning:
            out.append((i, CONTINUE))
        elif len(burning) == 1:
            out.append((i, REPROCESSED))
        else:
            out.append((i, ALERT))
    return out
