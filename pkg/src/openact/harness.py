"""End-to-end pipeline: load, ground, rank, optionally refine, evaluate.

Clips are isolated: a malformed table or an unscorable clip lands in the
report's failure section instead of aborting the run. Evaluation reports
exact correct/total counts next to the float accuracies.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .affinity import build_affinity_matrix, load_affinity_cache
from .config import EngineConfig
from .errors import ConfigError, DataError, EngineError
from .grounding import ground_objects
from .inference import ClipRanking, write_ranking_dump
from .kb import (
    Generator,
    KnowledgeGraph,
    load_aliases,
    load_edges,
    load_embeddings,
    resolve_label,
)
from .oracle_io import ClipManifest, read_features, read_likelihoods, read_manifest
from .semantic import ClipContext, RefinementResult, rank_context, refinement_loop


@dataclass(frozen=True)
class MetricCount:
    """Exact correct/total pair; the float accuracy is derived, never stored."""

    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise DataError("accuracy of zero clips is undefined")
        return self.correct / self.total


@dataclass(frozen=True)
class EvaluationReport:
    object_top1: MetricCount
    action_top1: MetricCount
    activity_top1: MetricCount
    per_clip: tuple[dict, ...] = ()
    failures: tuple[dict, ...] = ()
    search_space: int | None = None
    config: dict | None = None

    def __post_init__(self):
        if self.activity_top1.correct > min(
            self.object_top1.correct, self.action_top1.correct
        ):
            raise DataError(
                "activity accuracy cannot exceed object or action accuracy"
            )

    def to_dict(self) -> dict:
        def metric(m: MetricCount) -> dict:
            return {"correct": m.correct, "total": m.total, "accuracy": m.accuracy}

        return {
            "metrics": {
                "object": metric(self.object_top1),
                "action": metric(self.action_top1),
                "activity": metric(self.activity_top1),
            },
            "per_clip": list(self.per_clip),
            "failures": list(self.failures),
            "search_space": self.search_space,
            "config": self.config,
        }

    @staticmethod
    def from_dict(doc: dict) -> "EvaluationReport":
        def metric(d: dict) -> MetricCount:
            return MetricCount(correct=d["correct"], total=d["total"])

        return EvaluationReport(
            object_top1=metric(doc["metrics"]["object"]),
            action_top1=metric(doc["metrics"]["action"]),
            activity_top1=metric(doc["metrics"]["activity"]),
            per_clip=tuple(doc.get("per_clip", [])),
            failures=tuple(doc.get("failures", [])),
            search_space=doc.get("search_space"),
            config=doc.get("config"),
        )


def evaluate(
    predictions: Mapping[str, tuple[str, str]],
    truths: Mapping[str, tuple[str, str]],
    search_space: int | None = None,
    config: dict | None = None,
    failures: Sequence[dict] = (),
) -> EvaluationReport:
    """Exact-match top-1 accuracy for nouns, verbs, and the joint pair."""
    if not predictions:
        raise DataError("cannot evaluate zero clips")
    missing = sorted(c for c in predictions if c not in truths)
    if missing:
        raise DataError(f"clips predicted but missing truth: {', '.join(missing)}")
    obj = act = both = 0
    rows = []
    for clip_id in sorted(predictions):
        verb, noun = predictions[clip_id]
        t_verb, t_noun = truths[clip_id]
        o_ok, a_ok = noun == t_noun, verb == t_verb
        pair_ok = o_ok and a_ok
        obj += o_ok
        act += a_ok
        both += pair_ok
        rows.append(
            {
                "clip": clip_id,
                "verb": verb,
                "noun": noun,
                "true_verb": t_verb,
                "true_noun": t_noun,
                "object_correct": o_ok,
                "action_correct": a_ok,
                "activity_correct": pair_ok,
            }
        )
    n = len(rows)
    return EvaluationReport(
        object_top1=MetricCount(obj, n),
        action_top1=MetricCount(act, n),
        activity_top1=MetricCount(both, n),
        per_clip=tuple(rows),
        failures=tuple(failures),
        search_space=search_space,
        config=config,
    )


def write_report(report: EvaluationReport, path: str | Path, fmt: str) -> None:
    """Emit a report file; ``fmt`` is ``json`` or ``csv``."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "correct", "total", "accuracy"])
            for name, m in (
                ("object", report.object_top1),
                ("action", report.action_top1),
                ("activity", report.activity_top1),
            ):
                writer.writerow([name, m.correct, m.total, f"{100 * m.accuracy:.2f}"])
    else:
        raise ConfigError(f"unknown report format {fmt!r}")


@dataclass(frozen=True)
class RunResult:
    predictions: Mapping[str, tuple[str, str]]
    rankings: Mapping[str, ClipRanking]
    report: EvaluationReport | None
    failures: tuple[dict, ...]
    search_space: int
    refinement: RefinementResult | None = None


def _load_vocab_file(path: str | Path, aliases) -> list[str]:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                labels.append(resolve_label(line, aliases))
    return sorted(set(labels))


def _derive_vocab(tables) -> tuple[list[str], list[str]]:
    actions: set[str] = set()
    objects: set[str] = set()
    for table in tables.values():
        actions.update(table.concepts("action"))
        objects.update(table.concepts("object"))
    return sorted(actions), sorted(objects)


def _clip_context(
    entry: ClipManifest,
    table,
    object_vocab: Sequence[Generator],
    action_vocab: Sequence[str],
    graph: KnowledgeGraph,
    config: EngineConfig,
) -> ClipContext:
    hypotheses = ground_objects(table, object_vocab, graph, config.max_evidence)
    frame_obj_scores = {
        f: {h.object.label: h.frame_scores[f] for h in hypotheses}
        for f in table.frames
    }
    if table.concepts("action"):
        priors = {
            f: {a: table.rows[f].get(a, 0.0) for a in action_vocab}
            for f in table.frames
        }
    else:
        priors = None
    features = read_features(entry.features) if entry.features else None
    return ClipContext(
        clip_id=entry.clip_id,
        frame_obj_scores=frame_obj_scores,
        frame_action_priors=priors,
        features=features,
        truth=entry.truth,
    )


def run(
    manifest_path: str | Path,
    kb_path: str | Path,
    embeddings_path: str | Path | None = None,
    aliases_path: str | Path | None = None,
    config: EngineConfig | None = None,
    cache_path: str | Path | None = None,
    out_dir: str | Path | None = None,
    refine: bool = False,
) -> RunResult:
    """Run the full pipeline over a manifest.

    Deterministic given identical inputs and config: clip processing order,
    tie-breaking, and serialization are all fixed.
    """
    config = config or EngineConfig()
    config.validate()
    if refine and embeddings_path is None:
        raise ConfigError("refinement needs an embedding table")

    graph = load_edges(kb_path, config.relation_whitelist)
    aliases = load_aliases(aliases_path) if aliases_path else None
    embeddings = load_embeddings(embeddings_path) if embeddings_path else None
    entries = read_manifest(manifest_path)
    if not entries:
        raise DataError(f"{manifest_path}: manifest lists no clips")

    failures: list[dict] = []
    tables = {}
    known = set(graph.labels)
    for entry in entries:
        try:
            tables[entry.clip_id] = read_likelihoods(
                entry.likelihoods, clip_id=entry.clip_id,
                known_labels=known, aliases=aliases,
            )
        except EngineError as exc:
            failures.append({"clip": entry.clip_id, "error": str(exc)})

    if not tables:
        raise DataError(
            f"every clip failed validation; first failure: {failures[0]['error']}"
        )

    if config.action_vocab and config.object_vocab:
        action_labels = _load_vocab_file(config.action_vocab, aliases)
        object_labels = _load_vocab_file(config.object_vocab, aliases)
    else:
        action_labels, object_labels = _derive_vocab(tables)
    if not action_labels or not object_labels:
        raise ConfigError(
            "empty action or object vocabulary: supply vocab files or tables with "
            "action- and object-kind rows"
        )
    object_vocab = [
        Generator(label, "object", i) for i, label in enumerate(object_labels)
    ]
    search_space = len(action_labels) * len(object_labels)

    if cache_path and Path(cache_path).is_file():
        cache = load_affinity_cache(
            cache_path, graph, action_labels, object_labels,
            config.decay, config.max_hops, config.affinity_floor,
        )
    else:
        cache = build_affinity_matrix(
            graph, action_labels, object_labels,
            config.decay, config.max_hops, config.affinity_floor,
        )
        if cache_path:
            cache.save(cache_path)

    contexts: list[ClipContext] = []
    for entry in entries:
        if entry.clip_id not in tables:
            continue
        try:
            contexts.append(
                _clip_context(
                    entry, tables[entry.clip_id], object_vocab,
                    action_labels, graph, config,
                )
            )
        except EngineError as exc:
            failures.append({"clip": entry.clip_id, "error": str(exc)})

    refinement = None
    if refine:
        refinement = refinement_loop(contexts, cache, embeddings, config)
        rankings = dict(refinement.final_rankings)
    else:
        rankings = {
            ctx.clip_id: rank_context(
                ctx, cache, None,
                top_k=config.top_k_actions, energy_floor=config.energy_floor,
            )
            for ctx in contexts
        }

    predictions = {
        clip_id: (r.top().action, r.top().object) for clip_id, r in rankings.items()
    }
    truths = {e.clip_id: e.truth for e in entries if e.truth is not None}
    scored_truths = {c: t for c, t in truths.items() if c in predictions}
    report = None
    if scored_truths:
        report = evaluate(
            {c: predictions[c] for c in scored_truths},
            scored_truths,
            search_space=search_space,
            config=config.snapshot(),
            failures=failures,
        )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ranking_dump(
            {c: [r] for c, r in rankings.items()},
            out / "predictions.jsonl",
            limit=config.dump_top_k,
        )
        if report is not None:
            write_report(report, out / "report.json", "json")
            write_report(report, out / "report.csv", "csv")

    return RunResult(
        predictions=predictions,
        rankings=rankings,
        report=report,
        failures=tuple(failures),
        search_space=search_space,
        refinement=refinement,
    )
