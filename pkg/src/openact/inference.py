"""Energy-based ranking of activity interpretations.

Each (action, object) pair forms a configuration whose energy is the sum of
negative-log terms for the grounded object score, the pair affinity, and an
optional action prior. Probabilities are floored before the log so energies
stay finite; rankings ascend by energy with a total lexicographic tie-break,
making every ordering byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .affinity import AffinityCache
from .errors import ConfigError, ParseError

ENERGY_FLOOR = 1e-6


def phi(p: float, floor: float = ENERGY_FLOOR) -> float:
    """Negative natural log of a probability, floored at ``floor``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    return -math.log(max(p, floor))


@dataclass(frozen=True)
class Configuration:
    """One activity interpretation with its energy parts.

    ``energy`` always equals phi(p_obj) + phi(p_aff) + phi(p_act) (the last
    term only when a prior is present), so it can be recomputed from parts.
    """

    action: str
    object: str
    p_obj: float
    p_aff: float
    p_act: float | None
    energy: float


@dataclass(frozen=True)
class Ranking:
    """Configurations ascending by (energy, action, object)."""

    scope: str
    items: tuple[Configuration, ...]

    def top(self) -> Configuration:
        return self.items[0]


@dataclass(frozen=True)
class ClipRanking(Ranking):
    """Clip-scope ranking plus the smoothed per-action aggregates.

    ``action_marginal`` averages each action's min-max-normalized top-k score
    across frames (frames where the action missed the top-k contribute 0);
    ``action_energy`` is the mean over frames of the action's best pair
    energy. Both feed visual-semantic target building.
    """

    action_marginal: Mapping[str, float] = field(default_factory=dict)
    action_energy: Mapping[str, float] = field(default_factory=dict)


def rank_frame(
    frame_index: int,
    frame_obj_scores: Mapping[str, float],
    cache: AffinityCache,
    frame_action_priors: Mapping[str, float] | None = None,
    energy_floor: float = ENERGY_FLOOR,
) -> Ranking:
    """Score every (action, object) pair of the vocab for one frame.

    Objects missing from ``frame_obj_scores`` count as unscored (p = 0).
    When ``frame_action_priors`` is None the prior term is dropped, which is
    equivalent to a uniform prior up to a constant shift.
    """
    actions, objects = cache.actions, cache.objects
    if not actions or not objects:
        raise ConfigError("cannot rank with an empty vocabulary")
    p_obj = np.array([frame_obj_scores.get(o, 0.0) for o in objects])
    if p_obj.min() < 0.0 or p_obj.max() > 1.0:
        raise ValueError("object scores must lie in [0, 1]")
    e_obj = -np.log(np.maximum(p_obj, energy_floor))
    e_aff = -np.log(np.maximum(cache.normalized, energy_floor))
    if frame_action_priors is not None:
        p_act = np.array([frame_action_priors.get(a, 0.0) for a in actions])
        if p_act.min() < 0.0 or p_act.max() > 1.0:
            raise ValueError("action priors must lie in [0, 1]")
        e_act = -np.log(np.maximum(p_act, energy_floor))
    else:
        p_act = None
        e_act = np.zeros(len(actions))
    # term order matches the scalar recomputation phi(obj) + phi(aff) + phi(act)
    energies = e_obj[None, :] + e_aff + e_act[:, None]

    a_rank = {a: r for r, a in enumerate(sorted(actions))}
    o_rank = {o: r for r, o in enumerate(sorted(objects))}
    flat = energies.ravel()
    n_obj = len(objects)
    act_keys = np.array([a_rank[a] for a in actions]).repeat(n_obj)
    obj_keys = np.tile(np.array([o_rank[o] for o in objects]), len(actions))
    order = np.lexsort((obj_keys, act_keys, flat))

    items = []
    for f in order:
        i, j = divmod(int(f), n_obj)
        items.append(
            Configuration(
                action=actions[i],
                object=objects[j],
                p_obj=float(p_obj[j]),
                p_aff=float(cache.normalized[i, j]),
                p_act=None if p_act is None else float(p_act[i]),
                energy=float(flat[f]),
            )
        )
    return Ranking(scope=f"frame:{frame_index}", items=tuple(items))


def _top_k_scores(
    action_energies: Mapping[str, float], k: int
) -> dict[str, float]:
    """Min-max-normalized scores of the k lowest-energy actions."""
    chosen = sorted(action_energies.items(), key=lambda t: (t[1], t[0]))[:k]
    lo = min(e for _, e in chosen)
    hi = max(e for _, e in chosen)
    if hi == lo:
        return {a: 1.0 for a, _ in chosen}
    return {a: (hi - e) / (hi - lo) for a, e in chosen}


def rank_clip(
    frame_rankings: Sequence[Ranking],
    top_k: int = 5,
    energy_floor: float = ENERGY_FLOOR,
) -> ClipRanking:
    """Combine per-frame rankings into a clip ranking by mean pair energy.

    Clip-level probabilities are the geometric means of the (floored)
    per-frame values, so the stored energy stays recomputable from them.
    """
    if not frame_rankings:
        raise ValueError("need at least one frame ranking")
    pair_index = {
        (c.action, c.object): n for n, c in enumerate(frame_rankings[0].items)
    }
    n_pairs = len(pair_index)
    has_prior = frame_rankings[0].items[0].p_act is not None
    t_obj = np.zeros(n_pairs)
    t_aff = np.zeros(n_pairs)
    t_act = np.zeros(n_pairs)
    frame_action_energy: list[dict[str, float]] = []
    for ranking in frame_rankings:
        if len(ranking.items) != n_pairs:
            raise ValueError("frame rankings cover different pair sets")
        best_per_action: dict[str, float] = {}
        for c in ranking.items:
            if (c.p_act is not None) != has_prior:
                raise ValueError("action-prior presence differs across frames")
            n = pair_index[(c.action, c.object)]
            t_obj[n] += phi(c.p_obj, energy_floor)
            t_aff[n] += phi(c.p_aff, energy_floor)
            if has_prior:
                t_act[n] += phi(c.p_act, energy_floor)
            cur = best_per_action.get(c.action)
            if cur is None or c.energy < cur:
                best_per_action[c.action] = c.energy
        frame_action_energy.append(best_per_action)

    n_frames = len(frame_rankings)
    t_obj /= n_frames
    t_aff /= n_frames
    t_act /= n_frames

    items = []
    for (action, obj), n in pair_index.items():
        p_obj = math.exp(-t_obj[n])
        p_aff = math.exp(-t_aff[n])
        p_act = math.exp(-t_act[n]) if has_prior else None
        energy = float(t_obj[n] + t_aff[n] + (t_act[n] if has_prior else 0.0))
        items.append(Configuration(action, obj, p_obj, p_aff, p_act, energy))
    items.sort(key=lambda c: (c.energy, c.action, c.object))

    marginal_sums: dict[str, float] = {}
    energy_sums: dict[str, float] = {}
    for per_frame in frame_action_energy:
        for a, s in _top_k_scores(per_frame, top_k).items():
            marginal_sums[a] = marginal_sums.get(a, 0.0) + s
        for a, e in per_frame.items():
            energy_sums[a] = energy_sums.get(a, 0.0) + e
    action_marginal = {a: s / n_frames for a, s in marginal_sums.items()}
    action_energy = {a: e / n_frames for a, e in energy_sums.items()}
    return ClipRanking(
        scope="clip",
        items=tuple(items),
        action_marginal=action_marginal,
        action_energy=action_energy,
    )


def write_ranking_dump(
    rankings: Mapping[str, Sequence[Ranking]], path: str | Path, limit: int | None = None
) -> None:
    """Write a JSON-lines ranking dump, clip ids in sorted order.

    ``rankings`` maps clip id to the rankings to dump for that clip; at most
    ``limit`` rows are written per ranking.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for clip_id in sorted(rankings):
            for ranking in rankings[clip_id]:
                items = ranking.items if limit is None else ranking.items[:limit]
                for rank, c in enumerate(items, start=1):
                    row = {
                        "clip": clip_id,
                        "scope": ranking.scope,
                        "rank": rank,
                        "verb": c.action,
                        "noun": c.object,
                        "energy": c.energy,
                    }
                    fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_top1_predictions(path: str | Path) -> dict[str, tuple[str, str]]:
    """Read clip-scope rank-1 rows back from a ranking dump."""
    out: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno) from None
            for key in ("clip", "scope", "rank", "verb", "noun", "energy"):
                if key not in row:
                    raise ParseError(f"dump row missing key {key!r}", path=path, line=lineno)
            if row["scope"] == "clip" and row["rank"] == 1:
                if row["clip"] in out:
                    raise ParseError(
                        f"duplicate clip-scope rank-1 row for {row['clip']!r}",
                        path=path, line=lineno,
                    )
                out[row["clip"]] = (row["verb"], row["noun"])
    return out
