"""Evidence-based object grounding.

A candidate object's per-frame likelihood is corroborated by its ego-graph
neighbors: the raw oracle likelihood of the center is damped by the squared
prior-weighted sum of the neighbors' likelihoods. Concepts missing from a
frame contribute 0 to that sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ConfigError, UnscorableClipError
from .kb import EgoGraph, Generator, KnowledgeGraph, ego_graph
from .oracle_io import LikelihoodTable


@dataclass(frozen=True)
class GroundedHypothesis:
    """One object candidate with per-frame grounded scores and a clip score."""

    object: Generator
    frame_scores: Mapping[int, float]
    clip_score: float


def evidence_likelihood(ego: EgoGraph, frame_row: Mapping[str, float]) -> float:
    """Grounded likelihood of the ego center given one frame's concept row.

    Returns ``p_center * S**2`` with ``S`` the prior-weighted sum of the
    evidence likelihoods; falls back to the raw center likelihood when the
    center has no evidence. The result never exceeds the center likelihood
    because priors sum to one.
    """
    p_center = frame_row.get(ego.center.label, 0.0)
    if not 0.0 <= p_center <= 1.0:
        raise ValueError(f"center likelihood {p_center} outside [0, 1]")
    if not ego.evidence:
        return p_center
    support = 0.0
    for gen, prior in ego.evidence:
        p = frame_row.get(gen.label, 0.0)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"evidence likelihood {p} outside [0, 1]")
        support += prior * p
    return p_center * support * support


def ground_objects(
    table: LikelihoodTable,
    object_vocab: Sequence[Generator],
    g: KnowledgeGraph,
    max_evidence: int,
) -> list[GroundedHypothesis]:
    """Ground every vocab object against every frame of one clip.

    Clip scores are the arithmetic mean of the frame scores. The result is
    sorted by clip score descending, ties broken by label so the ranking is
    reproducible.
    """
    if not object_vocab:
        raise ConfigError("object vocabulary is empty")
    frames = table.frames
    if not frames:
        raise UnscorableClipError(f"clip {table.clip_id!r} has no frames")
    hypotheses = []
    for gen in object_vocab:
        ego = ego_graph(g, gen.label, max_evidence)
        frame_scores = {
            f: evidence_likelihood(ego, table.rows[f]) for f in frames
        }
        clip_score = sum(frame_scores.values()) / len(frames)
        hypotheses.append(GroundedHypothesis(gen, frame_scores, clip_score))
    hypotheses.sort(key=lambda h: (-h.clip_score, h.object.label))
    return hypotheses
