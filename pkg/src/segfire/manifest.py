"""Dataset manifests: CSV files listing ``path,label,origin`` per image."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

from .exceptions import FormatError, InvalidInputError

log = logging.getLogger(__name__)

HEADER = ("path", "label", "origin")
LABELS = ("fire", "nonfire")
ORIGINS = ("original", "augmented", "segmented", "synthetic")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    origin: str = "synthetic"

    def __post_init__(self):
        if self.label not in LABELS:
            raise InvalidInputError(f"unknown label {self.label!r}; expected one of {LABELS}")
        if self.origin not in ORIGINS:
            raise InvalidInputError(f"unknown origin {self.origin!r}; expected one of {ORIGINS}")


def write_manifest(entries: Iterable[ManifestEntry], path) -> Path:
    """Write entries with paths as given (relative paths resolve against the manifest's folder)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for e in entries:
            w.writerow([e.path, e.label, e.origin])
    os.replace(tmp, path)
    return path


def load_manifest(path, skip_missing: bool = False, check_paths: bool = True) -> List[ManifestEntry]:
    """Read a manifest.

    Missing image files raise :class:`FormatError` unless ``skip_missing``
    is set, in which case they are logged and dropped.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != HEADER:
        raise FormatError(f"{path}: first line must be the header {','.join(HEADER)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            entry = ManifestEntry(*(c.strip() for c in row))
        except InvalidInputError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if check_paths and not resolve(entry, path).is_file():
            if skip_missing:
                log.warning("%s:%d: skipping missing image %s", path, lineno, entry.path)
                continue
            raise FormatError(f"{path}:{lineno}: image {entry.path} not found")
        entries.append(entry)
    return entries


def resolve(entry: ManifestEntry, manifest_path) -> Path:
    p = Path(entry.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p
