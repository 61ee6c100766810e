"""Depth sweep: train and time one network per (conv layers, dense layers) cell."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .analysis import complexity_report
from .exceptions import BuildError, InvalidInputError
from .imaging.tiles import COLS, ROWS
from .model import SegNetConfig, TrainOptions, as_float_batch, build_segnet, evaluate, sweep_config, train
from .nn import forward_batch

log = logging.getLogger(__name__)

CONV_RANGE = (5, 6, 7, 9, 11)
DENSE_RANGE = (1, 2, 3)


@dataclass(frozen=True)
class SweepCell:
    conv_layers: int
    dense_layers: int
    feasible: bool
    accuracy: Optional[float] = None
    ms_per_image: Optional[float] = None
    macs: Optional[int] = None
    reason: str = ""


@dataclass
class SweepGrid:
    conv_range: Tuple[int, ...]
    dense_range: Tuple[int, ...]
    cells: Dict[Tuple[int, int], SweepCell] = field(default_factory=dict)

    @property
    def shape(self):
        return len(self.dense_range), len(self.conv_range)

    def cell(self, conv_layers, dense_layers) -> SweepCell:
        return self.cells[(conv_layers, dense_layers)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["conv_layers", "dense_layers", "feasible", "accuracy", "ms_per_image", "macs", "reason"])
        for d in self.dense_range:
            for c in self.conv_range:
                cell = self.cell(c, d)
                w.writerow([c, d, int(cell.feasible),
                            "" if cell.accuracy is None else f"{cell.accuracy:.4f}",
                            "" if cell.ms_per_image is None else f"{cell.ms_per_image:.3f}",
                            "" if cell.macs is None else cell.macs, cell.reason])
        return buf.getvalue()

    def to_text(self) -> str:
        """Dense layers down the side, conv layers across, ``accuracy / ms`` per cell."""
        width = 20
        lines = [f"{'':<9}" + "".join(f"{str(c) + ' Conv':>{width}}" for c in self.conv_range)]
        for d in self.dense_range:
            row = f"{str(d) + ' Dense':<9}"
            for c in self.conv_range:
                cell = self.cell(c, d)
                text = "infeasible" if not cell.feasible else f"{cell.accuracy:.3f} / {cell.ms_per_image:.1f} ms"
                row += f"{text:>{width}}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def time_per_image(model, tiles, repetitions=3) -> float:
    """Mean milliseconds to classify the twelve tiles of one complete image."""
    batch = as_float_batch(tiles[:ROWS * COLS])
    if len(batch) < ROWS * COLS:
        batch = np.resize(batch, (ROWS * COLS, *batch.shape[1:]))
    forward_batch(model, batch)  # warm-up
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        forward_batch(model, batch)
        times.append(time.perf_counter() - start)
    return 1000.0 * float(np.mean(times))


def sweep(train_set, test_set, conv_range: Sequence[int] = CONV_RANGE, dense_range: Sequence[int] = DENSE_RANGE,
          base: SegNetConfig = SegNetConfig(), epochs: int = 15, batch_size: int = 8, enhancements=None,
          options: Optional[TrainOptions] = None, timing_repetitions: int = 3) -> SweepGrid:
    """Train every grid cell on ``train_set`` and score it on ``test_set``.

    Cells whose layer stack shrinks a feature map to nothing are recorded
    as infeasible instead of raising.
    """
    if not conv_range or not dense_range:
        raise InvalidInputError("sweep ranges must be non-empty")
    grid = SweepGrid(tuple(conv_range), tuple(dense_range))
    x_test, y_test = test_set
    for d in grid.dense_range:
        for c in grid.conv_range:
            cfg = sweep_config(base, c, d)
            try:
                model = build_segnet(cfg)
            except BuildError as exc:
                grid.cells[(c, d)] = SweepCell(c, d, False, reason=str(exc))
                log.info("sweep cell %d conv / %d dense infeasible: %s", c, d, exc)
                continue
            macs = complexity_report(model).total_macs
            model, _ = train(model, train_set, None, epochs=epochs, batch_size=batch_size,
                             enhancements=enhancements, config=cfg.loss, options=options)
            acc, _ = evaluate(model, x_test, y_test, cfg.loss)
            ms = time_per_image(model, np.asarray(x_test), timing_repetitions)
            grid.cells[(c, d)] = SweepCell(c, d, True, acc, ms, macs)
            log.info("sweep cell %d conv / %d dense: acc %.4f, %.1f ms per image", c, d, acc, ms)
    return grid
