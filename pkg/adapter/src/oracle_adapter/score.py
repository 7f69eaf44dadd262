"""Score a clip's frames against a concept vocabulary and emit a likelihood table.

Output rows follow the ``*.ltab.jsonl`` schema consumed by the inference
engine: one JSON object per (frame, concept) with a probability obtained by
softmax over each concept kind group, so per-frame probabilities sum to one
within every kind.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from PIL import Image, UnidentifiedImageError

from .gaze import GazeRecord
from .roi import crop_roi
from .scorers import Scorer

log = logging.getLogger(__name__)

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
CONCEPT_KINDS = ("object", "evidence", "action")
PROMPT_TEMPLATE = "a photo of a {concept}"


class ScoreError(Exception):
    pass


def canonical(label: str) -> str:
    return "_".join(label.strip().lower().split())


def read_vocab(path: str | Path) -> list[tuple[str, str]]:
    """Read ``kind<TAB>label`` vocabulary lines, canonicalizing labels."""
    out: list[tuple[str, str]] = []
    seen: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ScoreError(f"{path}:{lineno}: expected kind<TAB>label")
            kind, label = parts[0].strip(), canonical(parts[1])
            if kind not in CONCEPT_KINDS:
                raise ScoreError(f"{path}:{lineno}: unknown kind {kind!r}")
            if not label:
                raise ScoreError(f"{path}:{lineno}: empty label")
            if seen.setdefault(label, kind) != kind:
                raise ScoreError(f"{path}:{lineno}: {label!r} re-declared as {kind}")
            if (label, kind) not in out:
                out.append((label, kind))
    if not out:
        raise ScoreError(f"{path}: empty vocabulary")
    return out


def read_aliases(path: str | Path) -> dict[str, str]:
    aliases: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ScoreError(f"{path}:{lineno}: expected src<TAB>dst")
            aliases[canonical(parts[0])] = canonical(parts[1])
    return aliases


_TRAILING_INT = re.compile(r"(\d+)$")


def discover_frames(frames_dir: str | Path) -> list[tuple[int, Path]]:
    """Image files in a directory as (frame_index, path), index order.

    Frame indices come from the trailing integer in each stem; when any stem
    lacks one, positional indices are used instead.
    """
    frames_dir = Path(frames_dir)
    files = sorted(
        p for p in frames_dir.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
    )
    if not files:
        raise ScoreError(f"{frames_dir}: no frame images found")
    matches = [_TRAILING_INT.search(p.stem) for p in files]
    if all(matches):
        indexed = sorted((int(m.group(1)), p) for m, p in zip(matches, files))
        if len({i for i, _ in indexed}) == len(indexed):
            return indexed
    return list(enumerate(files))


def _softmax(values: Sequence[float], temperature: float) -> list[float]:
    scaled = [v / temperature for v in values]
    peak = max(scaled)
    exps = [math.exp(v - peak) for v in scaled]
    total = sum(exps)
    return [e / total for e in exps]


@dataclass(frozen=True)
class ScoreStats:
    frames_scored: int
    frames_skipped: int
    scorer_failures: int


def score_clip(
    frames_dir: str | Path,
    gaze: Mapping[int, GazeRecord],
    vocab: Sequence[tuple[str, str]],
    scorer: Scorer,
    out_path: str | Path,
    clip_id: str | None = None,
    roi_fraction: float = 0.5,
    fps: float = 1.0,
    source_fps: float = 30.0,
    temperature: float = 1.0,
    aliases: Mapping[str, str] | None = None,
) -> ScoreStats:
    """Score sampled frames of one clip and write the likelihood table.

    Frames are sampled every ``round(source_fps / fps)`` files. Unreadable
    frames and per-frame scorer failures are skipped and counted, never
    fatal. Rows are appended in frame order, concepts sorted within a frame.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if fps <= 0 or source_fps <= 0:
        raise ValueError("frame rates must be > 0")
    frames = discover_frames(frames_dir)
    clip = clip_id or canonical(Path(frames_dir).name)
    stride = max(1, int(round(source_fps / fps)))
    sampled = frames[::stride]

    by_kind: dict[str, list[str]] = {}
    for label, kind in vocab:
        by_kind.setdefault(kind, []).append(label)
    prompts = {
        label: PROMPT_TEMPLATE.format(concept=label.replace("_", " "))
        for label, _ in vocab
    }
    emitted = {
        label: (aliases.get(label, label) if aliases else label) for label, _ in vocab
    }

    scored = skipped = failures = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for frame_index, frame_path in sampled:
            try:
                with Image.open(frame_path) as img:
                    image = crop_roi(img.convert("RGB"), gaze.get(frame_index), roi_fraction)
                    image.load()
            except (OSError, UnidentifiedImageError) as exc:
                log.warning("skipping unreadable frame %s: %s", frame_path, exc)
                skipped += 1
                continue
            row: dict[str, tuple[str, float]] = {}
            try:
                for kind in CONCEPT_KINDS:
                    labels = by_kind.get(kind)
                    if not labels:
                        continue
                    sims = scorer.score(image, [prompts[lab] for lab in labels])
                    if len(sims) != len(labels):
                        raise ScoreError(
                            f"scorer returned {len(sims)} scores for {len(labels)} prompts"
                        )
                    for lab, p in zip(labels, _softmax(sims, temperature)):
                        row[emitted[lab]] = (kind, p)
            except Exception as exc:  # scorer failure: omit the frame's rows
                log.warning("scorer failed on frame %s: %s", frame_path, exc)
                failures += 1
                continue
            for concept in sorted(row):
                kind, p = row[concept]
                obj = {
                    "clip": clip,
                    "frame": frame_index,
                    "concept": concept,
                    "kind": kind,
                    "p": p,
                }
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
            scored += 1
    return ScoreStats(scored, skipped, failures)
