"""File formats decoupling the engine from any particular vision-language oracle.

Likelihood tables are JSON-lines (``*.ltab.jsonl``), one object per row:
``{"clip": str, "frame": int, "concept": str, "kind": str, "p": float}``
with ``kind`` one of object/evidence/action. Rows are grouped by frame with
frame indices strictly increasing, concepts sorted within a frame. A concept
missing from a frame means "not scored" and contributes 0 to evidence sums.

Manifests are JSON arrays of clip entries; feature files are little-endian
f32 vectors behind an 8-byte header (u32 magic ``FVEC``, u32 dim).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, ParseError
from .kb import resolve_label

ROW_KEYS = ("clip", "frame", "concept", "kind", "p")
CONCEPT_KINDS = ("object", "evidence", "action")

FEATURE_MAGIC = 0x43455646  # ascii "FVEC" read as little-endian u32


@dataclass(frozen=True)
class LikelihoodTable:
    """Per-frame concept likelihoods for one clip, immutable after load."""

    clip_id: str
    rows: Mapping[int, Mapping[str, float]]
    kinds: Mapping[str, str]

    @property
    def frames(self) -> tuple[int, ...]:
        return tuple(sorted(self.rows))

    def concepts(self, kind: str | None = None) -> tuple[str, ...]:
        if kind is None:
            return tuple(sorted(self.kinds))
        return tuple(sorted(c for c, k in self.kinds.items() if k == kind))

    def scaled(self, factor: float) -> "LikelihoodTable":
        """Copy with every probability multiplied by ``factor`` in [0, 1]."""
        if not 0.0 <= factor <= 1.0:
            raise ValueError("scale factor must be in [0, 1]")
        rows = {
            frame: {c: p * factor for c, p in row.items()}
            for frame, row in self.rows.items()
        }
        return LikelihoodTable(self.clip_id, rows, dict(self.kinds))


def read_likelihoods(
    path: str | Path,
    clip_id: str | None = None,
    known_labels: Iterable[str] | None = None,
    aliases: Mapping[str, str] | None = None,
) -> LikelihoodTable:
    """Read and validate a ``*.ltab.jsonl`` likelihood table.

    Out-of-range probabilities are an error, never clamped. When
    ``known_labels`` is given, every concept must resolve into it through the
    alias map; offenders are reported together. An empty file is a valid
    zero-frame table.
    """
    rows: dict[int, dict[str, float]] = {}
    kinds: dict[str, str] = {}
    seen_frames: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("row is not a JSON object", path=path, line=lineno)
            if set(obj) != set(ROW_KEYS):
                raise ParseError(
                    f"row keys {sorted(obj)} do not match schema {sorted(ROW_KEYS)}",
                    path=path, line=lineno,
                )
            clip, frame, concept, kind, p = (obj[k] for k in ROW_KEYS)
            if not isinstance(clip, str) or not clip:
                raise ParseError("clip must be a non-empty string", path=path, line=lineno)
            if clip_id is None:
                clip_id = clip
            elif clip != clip_id:
                raise ParseError(
                    f"row clip {clip!r} does not match table clip {clip_id!r}",
                    path=path, line=lineno,
                )
            if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
                raise ParseError("frame must be a non-negative integer", path=path, line=lineno)
            if not isinstance(concept, str) or not concept:
                raise ParseError("concept must be a non-empty string", path=path, line=lineno)
            if kind not in CONCEPT_KINDS:
                raise ParseError(f"unknown kind {kind!r}", path=path, line=lineno)
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
                raise ParseError("p must be a finite number", path=path, line=lineno)
            if not 0.0 <= p <= 1.0:
                raise ParseError(f"probability {p} outside [0, 1]", path=path, line=lineno)
            concept = resolve_label(concept, aliases)
            if seen_frames and frame != seen_frames[-1]:
                if frame < seen_frames[-1] or frame in rows:
                    raise ParseError(
                        f"frame {frame} out of order (frames must be grouped, ascending)",
                        path=path, line=lineno,
                    )
            if frame not in rows:
                rows[frame] = {}
                seen_frames.append(frame)
            if concept in rows[frame]:
                raise ParseError(
                    f"duplicate concept {concept!r} in frame {frame}",
                    path=path, line=lineno,
                )
            if kinds.setdefault(concept, kind) != kind:
                raise ParseError(
                    f"concept {concept!r} re-declared with kind {kind!r}",
                    path=path, line=lineno,
                )
            rows[frame][concept] = float(p)
    if known_labels is not None:
        known = set(known_labels)
        offenders = sorted(c for c in kinds if c not in known)
        if offenders:
            raise DataError(
                f"{path}: unknown concepts after alias resolution: {', '.join(offenders)}"
            )
    return LikelihoodTable(clip_id or "", rows, kinds)


def write_likelihoods(table: LikelihoodTable, path: str | Path) -> None:
    """Serialize a table canonically: frames ascending, concepts sorted."""
    with open(path, "w", encoding="utf-8") as fh:
        for frame in sorted(table.rows):
            row = table.rows[frame]
            for concept in sorted(row):
                p = row[concept]
                if not 0.0 <= p <= 1.0:
                    raise DataError(f"probability {p} outside [0, 1]")
                obj = {
                    "clip": table.clip_id,
                    "frame": frame,
                    "concept": concept,
                    "kind": table.kinds[concept],
                    "p": p,
                }
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


@dataclass(frozen=True)
class ClipManifest:
    """One clip entry: likelihood table, optional features, optional truth."""

    clip_id: str
    likelihoods: Path
    features: Path | None = None
    truth: tuple[str, str] | None = None  # (verb, noun)


def read_manifest(path: str | Path) -> list[ClipManifest]:
    """Read ``manifest.json``; paths resolve relative to the manifest file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path) from None
    if not isinstance(raw, list):
        raise ParseError("manifest must be a JSON array of clip entries", path=path)
    base = path.parent
    entries: list[ClipManifest] = []
    seen: set[str] = set()
    for i, obj in enumerate(raw):
        where = f"entry {i}"
        if not isinstance(obj, dict):
            raise ParseError(f"{where}: not a JSON object", path=path)
        clip_id = obj.get("clip_id")
        if not isinstance(clip_id, str) or not clip_id:
            raise ParseError(f"{where}: clip_id must be a non-empty string", path=path)
        if clip_id in seen:
            raise DataError(f"{path}: duplicate clip_id {clip_id!r}")
        seen.add(clip_id)
        rel = obj.get("likelihoods")
        if not isinstance(rel, str):
            raise ParseError(f"{where}: missing likelihoods path", path=path)
        ltab = base / rel
        if not ltab.is_file():
            raise DataError(f"{path}: missing likelihood file {ltab}")
        features = None
        if obj.get("features") is not None:
            if not isinstance(obj["features"], str):
                raise ParseError(f"{where}: features must be a path string", path=path)
            features = base / obj["features"]
            if not features.is_file():
                raise DataError(f"{path}: missing feature file {features}")
        truth = None
        if obj.get("truth") is not None:
            t = obj["truth"]
            if (
                not isinstance(t, dict)
                or not isinstance(t.get("verb"), str)
                or not isinstance(t.get("noun"), str)
            ):
                raise ParseError(f"{where}: truth must be {{verb, noun}}", path=path)
            truth = (resolve_label(t["verb"]), resolve_label(t["noun"]))
        extra = set(obj) - {"clip_id", "likelihoods", "features", "truth"}
        if extra:
            raise ParseError(f"{where}: unknown keys {sorted(extra)}", path=path)
        entries.append(ClipManifest(clip_id, ltab, features, truth))
    return entries


def write_manifest(entries: Iterable[ClipManifest], path: str | Path) -> None:
    path = Path(path)
    base = path.parent
    out = []
    for e in entries:
        obj: dict = {
            "clip_id": e.clip_id,
            "likelihoods": str(Path(e.likelihoods).relative_to(base)),
        }
        obj["features"] = (
            str(Path(e.features).relative_to(base)) if e.features else None
        )
        obj["truth"] = (
            {"verb": e.truth[0], "noun": e.truth[1]} if e.truth else None
        )
        out.append(obj)
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def read_features(path: str | Path) -> np.ndarray:
    """Read a feature vector file: u32 magic, u32 dim, dim little-endian f32."""
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise ParseError("feature file shorter than its 8-byte header", path=path)
    magic, dim = struct.unpack("<II", blob[:8])
    if magic != FEATURE_MAGIC:
        raise ParseError(f"bad feature-file magic 0x{magic:08x}", path=path)
    payload = blob[8:]
    if len(payload) != 4 * dim:
        raise ParseError(
            f"feature payload holds {len(payload) // 4} values, header says {dim}",
            path=path,
        )
    return np.frombuffer(payload, dtype="<f4").astype(np.float64)


def write_features(vector: np.ndarray, path: str | Path) -> None:
    vec = np.asarray(vector, dtype="<f4").ravel()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", FEATURE_MAGIC, vec.size))
        fh.write(vec.tobytes())
