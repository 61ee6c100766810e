"""Forward-pass latency over batch sizes."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .exceptions import InvalidInputError
from .imaging.tiles import COLS, ROWS
from .nn import ModelGraph, forward_batch

TILES_PER_IMAGE = ROWS * COLS
CSV_HEADER = ("batch_size", "mean_ms", "per_segment_ms", "per_complete_image_ms", "repetitions")


@dataclass(frozen=True)
class BenchResult:
    batch_size: int
    mean_ms: float
    repetitions: int

    @property
    def per_segment_ms(self) -> float:
        return self.mean_ms / self.batch_size

    @property
    def per_complete_image_ms(self) -> float:
        return TILES_PER_IMAGE * self.per_segment_ms


def _timed_forward(model, batch, threads):
    if threads <= 1:
        start = time.perf_counter()
        forward_batch(model, batch)
        return time.perf_counter() - start
    chunks = np.array_split(batch, min(threads, len(batch)))
    with ThreadPoolExecutor(threads) as pool:
        start = time.perf_counter()
        list(pool.map(lambda c: forward_batch(model, c), chunks))
        return time.perf_counter() - start


def bench_latency(model: ModelGraph, batch_sizes: Sequence[int] = (1, 8, 32, 64), repetitions: int = 10,
                  seed: int = 0, threads: int = 1) -> List[BenchResult]:
    """Mean wall-clock time of one forward pass per batch size.

    Inputs are seeded random tiles.  One untimed warm-up pass precedes the
    ``repetitions`` timed passes for every batch size.  ``threads > 1``
    splits each batch across a thread pool.
    """
    if repetitions < 1:
        raise InvalidInputError("repetitions must be >= 1")
    if not batch_sizes or min(batch_sizes) < 1:
        raise InvalidInputError("batch sizes must be >= 1")
    rng = np.random.default_rng(seed)
    results = []
    for bs in batch_sizes:
        batch = rng.random((bs, *model.input_shape))
        _timed_forward(model, batch, threads)
        times = [_timed_forward(model, batch, threads) for _ in range(repetitions)]
        results.append(BenchResult(int(bs), 1000.0 * float(np.mean(times)), repetitions))
    return results


def bench_csv(results: Sequence[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        # repr keeps every digit, so the 12x relation survives a round trip
        w.writerow([r.batch_size, repr(r.mean_ms), repr(r.per_segment_ms),
                    repr(r.per_complete_image_ms), r.repetitions])
    return buf.getvalue()


def read_bench_csv(text: str) -> List[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (int(v) if k in ("batch_size", "repetitions") else float(v)) for k, v in row.items()}
            for row in rows]
