"""Knowledge graph and concept-embedding loading, plus per-object ego-graphs.

The graph is a weighted, relation-typed concept graph read from a tab-separated
edge dump. Raw weights are rescaled per relation so that every retained weight
lands in (0, 1]; traversal treats edges as undirected and collapses parallel
edges between a node pair to the strongest one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import ConfigError, DataError, NotFoundError, ParseError

EMBEDDING_DIM = 300

GENERATOR_KINDS = ("action", "object", "evidence")


def canonical_label(raw: str) -> str:
    """Lowercase, trim, and replace internal whitespace with underscores."""
    return "_".join(raw.strip().lower().split())


@dataclass(frozen=True)
class Generator:
    """A single concept atom: an action verb, object noun, or evidence node."""

    label: str
    kind: str
    id: int

    def __post_init__(self):
        if not self.label:
            raise DataError("generator label must be non-empty")
        if self.label != canonical_label(self.label):
            raise DataError(f"generator label {self.label!r} is not canonical")
        if self.kind not in GENERATOR_KINDS:
            raise DataError(f"unknown generator kind {self.kind!r}")


@dataclass(frozen=True)
class EgoGraph:
    """Radius-1 neighborhood of an object concept with normalized edge priors.

    ``evidence`` pairs each neighbor generator with its prior; priors sum to
    one unless the center is isolated. ``relations`` records, per neighbor,
    the relation whose edge weight won.
    """

    center: Generator
    evidence: tuple[tuple[Generator, float], ...]
    relations: tuple[str, ...]

    def __post_init__(self):
        if self.evidence:
            total = sum(p for _, p in self.evidence)
            if abs(total - 1.0) > 1e-9:
                raise DataError(f"ego priors sum to {total}, expected 1")
        labels = [g.label for g, _ in self.evidence]
        if len(set(labels)) != len(labels):
            raise DataError("duplicate evidence entries in ego-graph")
        if self.center.label in labels:
            raise DataError("ego-graph evidence contains its own center")


class KnowledgeGraph:
    """Immutable weighted concept graph with undirected adjacency access."""

    def __init__(
        self,
        edges: Iterable[tuple[str, str, str, float]],
        whitelist: Iterable[str] = (),
    ):
        # edges come in normalized: (src, dst, relation, weight in (0, 1])
        self.whitelist = tuple(sorted(set(whitelist)))
        edge_list = sorted(set(edges))
        labels = sorted({e[0] for e in edge_list} | {e[1] for e in edge_list})
        self._ids = {lab: i for i, lab in enumerate(labels)}
        self._labels = labels
        self._edges = tuple(edge_list)
        # undirected pair view: strongest edge between the two nodes wins,
        # ties resolved toward the lexicographically first relation
        best: dict[tuple[str, str], tuple[float, str]] = {}
        for src, dst, rel, w in edge_list:
            for a, b in ((src, dst), (dst, src)):
                cur = best.get((a, b))
                if cur is None or w > cur[0] or (w == cur[0] and rel < cur[1]):
                    best[(a, b)] = (w, rel)
        adj: dict[str, dict[str, tuple[float, str]]] = {lab: {} for lab in labels}
        for (a, b), (w, rel) in best.items():
            adj[a][b] = (w, rel)
        self._adj = adj
        self._sorted = {
            lab: tuple(
                sorted(
                    ((nb, w, rel) for nb, (w, rel) in nbrs.items()),
                    key=lambda t: (-t[1], t[0]),
                )
            )
            for lab, nbrs in adj.items()
        }

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    @property
    def edges(self) -> tuple[tuple[str, str, str, float], ...]:
        return self._edges

    def has_node(self, label: str) -> bool:
        return label in self._ids

    def node_id(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise NotFoundError(f"unknown concept {label!r}") from None

    def neighbors(self, label: str) -> tuple[tuple[str, float, str], ...]:
        """Neighbors of ``label`` as (neighbor, weight, relation), strongest first."""
        try:
            return self._sorted[label]
        except KeyError:
            raise NotFoundError(f"unknown concept {label!r}") from None

    def pair_weight(self, a: str, b: str) -> float:
        """Strongest undirected edge weight between a and b, 0 if none."""
        entry = self._adj.get(a, {}).get(b)
        return entry[0] if entry else 0.0

    def degree(self, label: str) -> int:
        if label not in self._ids:
            raise NotFoundError(f"unknown concept {label!r}")
        return len(self._adj[label])


def _iter_records(stream, path):
    close = False
    if isinstance(stream, (str, Path)):
        path = str(stream)
        stream = open(stream, "r", encoding="utf-8")
        close = True
    try:
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            yield lineno, line.rstrip("\n"), path
    finally:
        if close:
            stream.close()


def load_edges(
    edge_stream: str | Path | IO[str],
    relation_whitelist: Iterable[str],
) -> KnowledgeGraph:
    """Build a KnowledgeGraph from a tab-separated edge dump.

    Lines are ``start<TAB>relation<TAB>end<TAB>weight``. Only whitelisted
    relations are retained; duplicate (src, dst, relation) triples collapse to
    the max raw weight; raw weights are rescaled to (0, 1] by the per-relation
    maximum. Self-loops and zero-weight edges carry no evidence and are
    dropped.
    """
    whitelist = set(relation_whitelist)
    if not whitelist:
        raise ConfigError("relation whitelist must be non-empty")
    raw: dict[tuple[str, str, str], float] = {}
    saw_records = False
    path = None
    for lineno, line, path in _iter_records(edge_stream, path):
        saw_records = True
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(
                f"expected 4 tab-separated fields, got {len(parts)}",
                path=path, line=lineno,
            )
        start, relation, end, weight_s = parts
        start, end = canonical_label(start), canonical_label(end)
        relation = relation.strip()
        if not start or not end or not relation:
            raise ParseError("empty field in edge record", path=path, line=lineno)
        try:
            weight = float(weight_s)
        except ValueError:
            raise ParseError(
                f"non-numeric weight {weight_s!r}", path=path, line=lineno
            ) from None
        if not math.isfinite(weight) or weight < 0:
            raise ParseError(
                f"weight must be finite and >= 0, got {weight_s}",
                path=path, line=lineno,
            )
        if relation not in whitelist:
            continue
        if start == end or weight == 0.0:
            continue
        key = (start, end, relation)
        if key not in raw or weight > raw[key]:
            raw[key] = weight
    if saw_records and not raw:
        raise ConfigError(
            "edge dump yielded an empty graph: every record was filtered out"
        )
    rel_max: dict[str, float] = {}
    for (_, _, rel), w in raw.items():
        rel_max[rel] = max(rel_max.get(rel, 0.0), w)
    normalized = [
        (src, dst, rel, w / rel_max[rel]) for (src, dst, rel), w in raw.items()
    ]
    return KnowledgeGraph(normalized, whitelist=whitelist)


def ego_graph(g: KnowledgeGraph, center_label: str, max_evidence: int) -> EgoGraph:
    """Extract the evidence structure around one object concept.

    Neighbors are ranked by edge weight (ties by label), truncated to
    ``max_evidence``, and their weights renormalized into priors summing to
    one. An isolated center yields an empty evidence list.
    """
    if max_evidence < 1:
        raise ValueError("max_evidence must be >= 1")
    center_label = canonical_label(center_label)
    neighbors = g.neighbors(center_label)[:max_evidence]
    center = Generator(center_label, "object", g.node_id(center_label))
    if not neighbors:
        return EgoGraph(center=center, evidence=(), relations=())
    total = sum(w for _, w, _ in neighbors)
    evidence = tuple(
        (Generator(nb, "evidence", g.node_id(nb)), w / total)
        for nb, w, _ in neighbors
    )
    relations = tuple(rel for _, _, rel in neighbors)
    return EgoGraph(center=center, evidence=evidence, relations=relations)


class EmbeddingTable:
    """Label -> unit-norm semantic vector, all of dimension EMBEDDING_DIM."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self._vectors = {}
        for label, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (EMBEDDING_DIM,):
                raise DataError(
                    f"embedding for {label!r} has shape {arr.shape}, "
                    f"expected ({EMBEDDING_DIM},)"
                )
            norm = float(np.linalg.norm(arr))
            if norm == 0.0:
                raise DataError(f"zero embedding vector for {label!r}")
            self._vectors[label] = arr / norm

    def __contains__(self, label: str) -> bool:
        return label in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __getitem__(self, label: str) -> np.ndarray:
        try:
            return self._vectors[label]
        except KeyError:
            raise NotFoundError(f"no embedding for {label!r}") from None

    def labels(self) -> list[str]:
        return sorted(self._vectors)

    def matrix(self, labels: Iterable[str]) -> np.ndarray:
        return np.stack([self[lab] for lab in labels])


def load_embeddings(stream: str | Path | IO[str]) -> EmbeddingTable:
    """Read whitespace-separated ``label v1 ... v300`` records.

    An optional first header line ``count dim`` is skipped. Vectors are
    L2-normalized on load; zero vectors are rejected.
    """
    vectors: dict[str, np.ndarray] = {}
    path = None
    first = True
    for lineno, line, path in _iter_records(stream, path):
        parts = line.split()
        if first:
            first = False
            if len(parts) == 2:
                try:
                    _count, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    raise ParseError(
                        "malformed header line", path=path, line=lineno
                    ) from None
                if dim != EMBEDDING_DIM:
                    raise ParseError(
                        f"header declares dimension {dim}, expected {EMBEDDING_DIM}",
                        path=path, line=lineno,
                    )
                continue
        if len(parts) != EMBEDDING_DIM + 1:
            raise ParseError(
                f"expected label + {EMBEDDING_DIM} values, got {len(parts)} fields",
                path=path, line=lineno,
            )
        label = canonical_label(parts[0])
        if label in vectors:
            raise ParseError(f"duplicate embedding label {label!r}", path=path, line=lineno)
        try:
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-numeric embedding value", path=path, line=lineno) from None
        if not np.all(np.isfinite(vec)):
            raise ParseError("non-finite embedding value", path=path, line=lineno)
        if float(np.linalg.norm(vec)) == 0.0:
            raise DataError(f"zero embedding vector for {label!r} (line {lineno})")
        vectors[label] = vec
    return EmbeddingTable(vectors)


def load_aliases(stream: str | Path | IO[str]) -> dict[str, str]:
    """Read ``dataset_label<TAB>canonical_label`` alias lines."""
    aliases: dict[str, str] = {}
    path = None
    for lineno, line, path in _iter_records(stream, path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(
                f"expected 2 tab-separated fields, got {len(parts)}",
                path=path, line=lineno,
            )
        src, dst = canonical_label(parts[0]), canonical_label(parts[1])
        if not src or not dst:
            raise ParseError("empty alias field", path=path, line=lineno)
        if src in aliases and aliases[src] != dst:
            raise ParseError(f"conflicting alias for {src!r}", path=path, line=lineno)
        aliases[src] = dst
    return aliases


def resolve_label(label: str, aliases: Mapping[str, str] | None = None) -> str:
    """Canonicalize a label and apply the alias map when one is given."""
    canon = canonical_label(label)
    if aliases:
        return aliases.get(canon, canon)
    return canon
