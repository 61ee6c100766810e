"""Confusion counts and the derived rates, with fire as the positive class."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..exceptions import InvalidInputError

POSITIVE = "fire"
_VOCAB = ("fire", "nonfire")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


def _as_label(v):
    if v in (1, True):
        return "fire"
    if v in (-1, 0, False):
        return "nonfire"
    if v not in _VOCAB:
        raise InvalidInputError(f"unknown label {v!r}")
    return v


def confusion(predictions, labels) -> ConfusionCounts:
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise InvalidInputError(f"{len(predictions)} predictions for {len(labels)} labels")
    if not labels:
        raise InvalidInputError("empty input")
    tp = tn = fp = fn = 0
    for pred, true in zip(map(_as_label, predictions), map(_as_label, labels)):
        if true == POSITIVE:
            tp += pred == POSITIVE
            fn += pred != POSITIVE
        else:
            fp += pred == POSITIVE
            tn += pred != POSITIVE
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num, den) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


@dataclass(frozen=True)
class MetricsReport:
    """Exact rates; ``None`` marks a rate whose denominator is zero."""

    fpr: Optional[Fraction]
    fnr: Optional[Fraction]
    tnr: Optional[Fraction]
    recall: Optional[Fraction]
    accuracy: Fraction
    precision: Optional[Fraction]

    FIELDS = ("fpr", "fnr", "tnr", "recall", "accuracy", "precision")

    def as_floats(self):
        return {k: (None if getattr(self, k) is None else float(getattr(self, k))) for k in self.FIELDS}


def metrics(counts: ConfusionCounts) -> MetricsReport:
    if counts.total == 0:
        raise InvalidInputError("all confusion counts are zero")
    c = counts
    return MetricsReport(
        fpr=_ratio(c.fp, c.fp + c.tn),
        fnr=_ratio(c.fn, c.tp + c.fn),
        tnr=_ratio(c.tn, c.fp + c.tn),
        recall=_ratio(c.tp, c.tp + c.fn),
        accuracy=Fraction(c.tp + c.tn, c.total),
        precision=_ratio(c.tp, c.tp + c.fp),
    )
