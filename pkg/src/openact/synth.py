"""Seeded synthetic worlds for end-to-end verification.

A world is a small knowledge graph with planted action-object activities,
random unit concept embeddings, likelihood tables from a simulated noisy
oracle, and clip features that are noisy linear images of the true action
embeddings. Everything derives from one seed: the same spec always produces
byte-identical files.

Planting modes:
  * ``exclusive`` - objects are partitioned among actions and only planted
    pairs are connected, so every planted pair has strictly higher affinity
    than every distractor pair.
  * ``uniform`` - every (action, object) pair is planted with equal weight,
    leaving the oracle as the only signal; used for noise-floor studies.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EngineConfig
from .errors import DataError
from .kb import EMBEDDING_DIM
from .oracle_io import ClipManifest, LikelihoodTable, write_features, write_likelihoods, write_manifest

PLANT_MODES = ("exclusive", "uniform")


@dataclass(frozen=True)
class SyntheticWorldSpec:
    """Shape, noise level, and seed of a generated world."""

    actions: int
    objects: int
    evidence_per_object: int = 2
    noise: float = 0.0
    clips_per_activity: int = 5
    seed: int = 0
    plant_mode: str = "exclusive"
    frames_per_clip: int = 4
    feature_dim: int = 64
    max_clips: int | None = None

    def validate(self) -> None:
        if self.actions < 1 or self.objects < 1:
            raise DataError("world needs at least one action and one object")
        if self.evidence_per_object < 0:
            raise DataError("evidence_per_object must be >= 0")
        if not 0.0 <= self.noise <= 1.0:
            raise DataError("noise must be in [0, 1]")
        if self.clips_per_activity < 1:
            raise DataError("clips_per_activity must be >= 1")
        if self.plant_mode not in PLANT_MODES:
            raise DataError(f"unknown plant_mode {self.plant_mode!r}")
        if self.frames_per_clip < 1:
            raise DataError("frames_per_clip must be >= 1")
        if self.feature_dim < 1:
            raise DataError("feature_dim must be >= 1")
        if self.max_clips is not None and self.max_clips < 1:
            raise DataError("max_clips must be >= 1 when set")
        if not self.activities():
            raise DataError("world spec plants zero activities")

    def action_labels(self) -> list[str]:
        return [f"act{i:03d}" for i in range(self.actions)]

    def object_labels(self) -> list[str]:
        return [f"obj{j:03d}" for j in range(self.objects)]

    def evidence_labels(self, obj: str) -> list[str]:
        return [f"ev_{obj}_{m}" for m in range(self.evidence_per_object)]

    def activities(self) -> list[tuple[str, str]]:
        acts, objs = self.action_labels(), self.object_labels()
        if self.plant_mode == "uniform":
            return [(a, o) for a in acts for o in objs]
        return [(acts[j % len(acts)], o) for j, o in enumerate(objs)]


@dataclass(frozen=True)
class WorldPaths:
    root: Path
    edges: Path
    embeddings: Path
    manifest: Path
    vocab: Path
    config: Path


def _format_vec(vec: np.ndarray) -> str:
    return " ".join(f"{x:.6f}" for x in vec)


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _write_config(path: Path) -> None:
    cfg = EngineConfig()
    lines = []
    for f in dataclasses.fields(EngineConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            items = ", ".join(f'"{v}"' for v in value)
            lines.append(f"{f.name} = [{items}]")
        elif isinstance(value, bool):
            lines.append(f"{f.name} = {str(value).lower()}")
        elif isinstance(value, (int, float)):
            lines.append(f"{f.name} = {value!r}")
        else:
            lines.append(f'{f.name} = "{value}"')
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def generate_world(spec: SyntheticWorldSpec, out_dir: str | Path) -> WorldPaths:
    """Write a complete synthetic world under ``out_dir``."""
    spec.validate()
    root = Path(out_dir)
    (root / "tables").mkdir(parents=True, exist_ok=True)
    (root / "features").mkdir(exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    acts = spec.action_labels()
    objs = spec.object_labels()
    evidence = {o: spec.evidence_labels(o) for o in objs}
    activities = spec.activities()
    planted = set(activities)

    # edge dump; raw weights keep planted pairs at the per-relation maximum
    edge_lines = []
    for a, o in activities:
        edge_lines.append(f"{a}\tUsedFor\t{o}\t2.0")
    for o in objs:
        for ev in evidence[o]:
            w = 1.0 + float(rng.random())
            edge_lines.append(f"{o}\tRelatedTo\t{ev}\t{w!r}")
    edges_path = root / "edges.tsv"
    edges_path.write_text("\n".join(edge_lines) + "\n", encoding="utf-8")

    # embeddings: random unit vectors, rounded as stored so loaders see the
    # exact same values the feature generator uses
    all_labels = acts + objs + [ev for o in objs for ev in evidence[o]]
    stored: dict[str, np.ndarray] = {}
    for label in all_labels:
        vec = _unit(rng.standard_normal(EMBEDDING_DIM))
        stored[label] = np.round(vec, 6)
    emb_path = root / "embeddings.txt"
    with open(emb_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(all_labels)} {EMBEDDING_DIM}\n")
        for label in all_labels:
            fh.write(f"{label} {_format_vec(stored[label])}\n")
    emb_used = {label: _unit(vec) for label, vec in stored.items()}

    # clip features are images of the true-action embedding under one fixed
    # random linear map, plus sigma-scaled gaussian noise
    feature_map = rng.standard_normal((EMBEDDING_DIM, spec.feature_dim))

    clip_order = [
        activities[k]
        for _ in range(spec.clips_per_activity)
        for k in range(len(activities))
    ]
    if spec.max_clips is not None:
        clip_order = clip_order[: spec.max_clips]

    entries = []
    sigma = spec.noise
    for idx, (verb, noun) in enumerate(clip_order):
        clip_id = f"clip{idx:04d}"
        true_concepts = {verb, noun, *evidence[noun]}
        rows: dict[int, dict[str, float]] = {}
        kinds: dict[str, str] = {}
        for frame in range(spec.frames_per_clip):
            row: dict[str, float] = {}
            for concept, kind in _concept_order(acts, objs, evidence):
                u = float(rng.random())
                if concept in true_concepts:
                    p = min(max(1.0 - sigma * u, 0.0), 1.0)
                else:
                    p = sigma * u
                row[concept] = p
                kinds[concept] = kind
            rows[frame] = row
        table = LikelihoodTable(clip_id, rows, kinds)
        table_path = root / "tables" / f"{clip_id}.ltab.jsonl"
        write_likelihoods(table, table_path)

        feat = emb_used[verb] @ feature_map + sigma * rng.standard_normal(spec.feature_dim)
        feat_path = root / "features" / f"{clip_id}.fvec"
        write_features(feat, feat_path)

        entries.append(
            ClipManifest(
                clip_id=clip_id,
                likelihoods=table_path,
                features=feat_path,
                truth=(verb, noun),
            )
        )

    manifest_path = root / "manifest.json"
    write_manifest(entries, manifest_path)

    vocab_path = root / "vocab.tsv"
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for a in acts:
            fh.write(f"action\t{a}\n")
        for o in objs:
            fh.write(f"object\t{o}\n")

    config_path = root / "config.toml"
    _write_config(config_path)

    (root / "world.json").write_text(
        json.dumps(
            {
                "spec": dataclasses.asdict(spec),
                "activities": [list(t) for t in activities],
                "planted_pairs": len(planted),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return WorldPaths(
        root=root,
        edges=edges_path,
        embeddings=emb_path,
        manifest=manifest_path,
        vocab=vocab_path,
        config=config_path,
    )


def _concept_order(acts, objs, evidence):
    for o in objs:
        yield o, "object"
    for o in objs:
        for ev in evidence[o]:
            yield ev, "evidence"
    for a in acts:
        yield a, "action"
