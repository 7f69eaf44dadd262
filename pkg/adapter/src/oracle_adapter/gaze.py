"""Gaze fixation records: CSV ``frame,x,y,valid`` with normalized coordinates."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class GazeError(Exception):
    pass


@dataclass(frozen=True)
class GazeRecord:
    """One fixation; coordinates are clamped to the unit square on load."""

    frame_index: int
    x: float
    y: float
    valid: bool


_TRUTHY = {"1", "true", "yes"}
_FALSY = {"0", "false", "no"}


def _parse_valid(token: str, lineno: int) -> bool:
    t = token.strip().lower()
    if t in _TRUTHY:
        return True
    if t in _FALSY:
        return False
    raise GazeError(f"line {lineno}: invalid validity flag {token!r}")


def read_gaze(path: str | Path) -> dict[int, GazeRecord]:
    """Read gaze CSV; an optional header row is skipped. Later rows for the
    same frame override earlier ones."""
    records: dict[int, GazeRecord] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue  # header row
            if len(row) != 4:
                raise GazeError(f"line {lineno}: expected 4 columns, got {len(row)}")
            try:
                frame = int(row[0])
                x, y = float(row[1]), float(row[2])
            except ValueError as exc:
                raise GazeError(f"line {lineno}: {exc}") from None
            if frame < 0:
                raise GazeError(f"line {lineno}: negative frame index")
            valid = _parse_valid(row[3], lineno)
            records[frame] = GazeRecord(
                frame_index=frame,
                x=min(max(x, 0.0), 1.0),
                y=min(max(y, 0.0), 1.0),
                valid=valid,
            )
    return records
