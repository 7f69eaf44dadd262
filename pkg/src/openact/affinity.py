"""Action-object affinity via bounded weighted path search.

Every simple path of at most ``max_hops`` edges between an action and an
object is scored as the sum of its edge weights, each damped by an
exponential decay in the edge's position along the path (counted from the
action side). The pair's affinity is the maximum path score; the full
action x object matrix is max-normalized, floored, and persisted together
with a fingerprint of the settings that produced it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError
from .kb import KnowledgeGraph

AFFINITY_FLOOR = 1e-4


@dataclass(frozen=True)
class PathScore:
    """A simple path with its per-edge decayed contributions."""

    nodes: tuple[str, ...]
    contributions: tuple[float, ...]
    total: float

    def __len__(self) -> int:
        return len(self.contributions)


def _decay_weights(decay: float, max_hops: int) -> list[float]:
    return [math.exp(-decay * k) for k in range(1, max_hops + 1)]


def _check_pair(g: KnowledgeGraph, a: str, b: str, max_hops: int) -> None:
    if a == b:
        raise ValueError("path endpoints must differ")
    if not 1 <= max_hops <= 5:
        raise ValueError("max_hops must be in [1, 5]")
    g.node_id(a)
    g.node_id(b)


def enumerate_paths(
    g: KnowledgeGraph, a: str, b: str, decay: float, max_hops: int
) -> list[PathScore]:
    """All simple paths from ``a`` to ``b`` of at most ``max_hops`` edges.

    Returned best-first: descending total, then shorter path, then
    lexicographic node sequence. A disconnected pair yields an empty list.
    """
    _check_pair(g, a, b, max_hops)
    dw = _decay_weights(decay, max_hops)
    results: list[PathScore] = []
    path = [a]
    on_path = {a}

    def dfs(node: str, depth: int, contribs: tuple[float, ...], total: float):
        if depth == max_hops:
            return
        for nb, w, _rel in g.neighbors(node):
            if nb in on_path:
                continue
            c = dw[depth] * w
            if nb == b:
                results.append(
                    PathScore(tuple(path) + (b,), contribs + (c,), total + c)
                )
                continue
            path.append(nb)
            on_path.add(nb)
            dfs(nb, depth + 1, contribs + (c,), total + c)
            path.pop()
            on_path.remove(nb)

    dfs(a, 0, (), 0.0)
    results.sort(key=lambda p: (-p.total, len(p), p.nodes))
    return results


def path_affinity(
    g: KnowledgeGraph, action: str, obj: str, decay: float, max_hops: int
) -> float:
    """Max path score between an action and an object; 0 when disconnected."""
    paths = enumerate_paths(g, action, obj, decay, max_hops)
    return paths[0].total if paths else 0.0


def _best_totals_from(
    g: KnowledgeGraph,
    source: str,
    targets: frozenset[str],
    decay: float,
    max_hops: int,
) -> dict[str, float]:
    """Best path score from ``source`` to every reachable target.

    One bounded DFS per source; targets stay traversable as interior nodes
    so results match per-pair enumeration exactly.
    """
    dw = _decay_weights(decay, max_hops)
    best: dict[str, float] = {}
    on_path = {source}

    def dfs(node: str, depth: int, total: float):
        if depth == max_hops:
            return
        for nb, w, _rel in g.neighbors(node):
            if nb in on_path:
                continue
            t = total + dw[depth] * w
            if nb in targets and t > best.get(nb, -math.inf):
                best[nb] = t
            on_path.add(nb)
            dfs(nb, depth + 1, t)
            on_path.remove(nb)

    dfs(source, 0, 0.0)
    return best


def _sha256_lines(lines: Sequence[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _fingerprint(
    decay: float, max_hops: int, whitelist: Sequence[str], actions, objects
) -> dict:
    return {
        "lambda": float(decay),
        "l_max": int(max_hops),
        "whitelist_sha": _sha256_lines(sorted(whitelist)),
        "vocab_sha": _sha256_lines(["actions", *actions, "objects", *objects]),
    }


@dataclass(frozen=True)
class AffinityCache:
    """Dense action x object affinity matrix plus its config fingerprint."""

    actions: tuple[str, ...]
    objects: tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray
    fingerprint: dict

    def __post_init__(self):
        object.__setattr__(self, "_arow", {a: i for i, a in enumerate(self.actions)})
        object.__setattr__(self, "_ocol", {o: j for j, o in enumerate(self.objects)})

    def value(self, action: str, obj: str) -> float:
        return float(self.normalized[self._arow[action], self._ocol[obj]])

    def save(self, path: str | Path) -> None:
        doc = {
            "fingerprint": self.fingerprint,
            "actions": list(self.actions),
            "objects": list(self.objects),
            "matrix": [[float(x) for x in row] for row in self.raw],
        }
        Path(path).write_text(
            json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8"
        )


def _normalize(raw: np.ndarray, floor: float) -> np.ndarray:
    peak = float(raw.max()) if raw.size else 0.0
    if peak <= 0.0:
        raise ConfigError(
            "affinity matrix is all-zero: the graph relates no action-object pair"
        )
    return np.clip(raw / peak, floor, 1.0)


def build_affinity_matrix(
    g: KnowledgeGraph,
    action_vocab: Sequence[str],
    object_vocab: Sequence[str],
    decay: float,
    max_hops: int,
    floor: float = AFFINITY_FLOOR,
) -> AffinityCache:
    """Fill the raw matrix pair by pair and max-normalize it into [floor, 1]."""
    if not action_vocab or not object_vocab:
        raise ConfigError("action and object vocabularies must be non-empty")
    for label in (*action_vocab, *object_vocab):
        g.node_id(label)
    targets = frozenset(object_vocab)
    raw = np.zeros((len(action_vocab), len(object_vocab)))
    for i, action in enumerate(action_vocab):
        best = _best_totals_from(g, action, targets, decay, max_hops)
        for j, obj in enumerate(object_vocab):
            if obj == action:
                continue  # path endpoints must differ; textual collisions score 0
            raw[i, j] = best.get(obj, 0.0)
    return AffinityCache(
        actions=tuple(action_vocab),
        objects=tuple(object_vocab),
        raw=raw,
        normalized=_normalize(raw, floor),
        fingerprint=_fingerprint(decay, max_hops, g.whitelist, action_vocab, object_vocab),
    )


def load_affinity_cache(
    path: str | Path,
    g: KnowledgeGraph,
    action_vocab: Sequence[str],
    object_vocab: Sequence[str],
    decay: float,
    max_hops: int,
    floor: float = AFFINITY_FLOOR,
) -> AffinityCache:
    """Load a persisted matrix, refusing any fingerprint mismatch."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path) from None
    for key in ("fingerprint", "actions", "objects", "matrix"):
        if key not in doc:
            raise ParseError(f"cache missing key {key!r}", path=path)
    expected = _fingerprint(decay, max_hops, g.whitelist, action_vocab, object_vocab)
    if doc["fingerprint"] != expected:
        mismatched = sorted(
            k for k in expected if doc["fingerprint"].get(k) != expected[k]
        )
        raise ConfigError(
            f"{path}: affinity cache fingerprint mismatch on {', '.join(mismatched)}"
        )
    raw = np.asarray(doc["matrix"], dtype=np.float64)
    if raw.shape != (len(action_vocab), len(object_vocab)):
        raise ParseError(
            f"matrix shape {raw.shape} does not match vocab sizes", path=path
        )
    return AffinityCache(
        actions=tuple(action_vocab),
        objects=tuple(object_vocab),
        raw=raw,
        normalized=_normalize(raw, floor),
        fingerprint=expected,
    )
