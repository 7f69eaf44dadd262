"""Visual-semantic action grounding and posterior-based refinement.

A linear map from clip feature vectors into the 300-d concept embedding
space is fit in closed form against temporally smoothed action targets.
Its predictions are blended back into per-clip action priors, rankings are
rebuilt, and the cycle repeats until the validation error stops improving.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .affinity import AffinityCache
from .config import EngineConfig
from .errors import DataError, ParseError
from .kb import EMBEDDING_DIM, EmbeddingTable
from .inference import ClipRanking, Ranking, rank_clip, rank_frame

MODEL_MAGIC = 0x4A4F5250  # ascii "PROJ" as little-endian u32


@dataclass(frozen=True)
class ProjectionModel:
    """Linear map from visual features to the semantic embedding space."""

    weights: np.ndarray  # (d_vis, 300)
    bias: np.ndarray     # (300,)
    ridge: float = 0.0
    iterations: int = 1
    train_mse: float | None = None

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[1] != EMBEDDING_DIM:
            raise DataError(f"weight matrix shape {self.weights.shape} is invalid")
        if self.bias.shape != (EMBEDDING_DIM,):
            raise DataError(f"bias shape {self.bias.shape} is invalid")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise DataError("projection parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    def project(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias


@dataclass(frozen=True)
class ActionPosterior:
    """Distribution over action labels, tracked across refinement iterations."""

    probs: Mapping[str, float]
    iteration: int = 0

    def __post_init__(self):
        if not self.probs:
            raise DataError("posterior must cover at least one action")
        vals = list(self.probs.values())
        if min(vals) < 0.0 or max(vals) > 1.0:
            raise DataError("posterior entries must lie in [0, 1]")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise DataError(f"posterior sums to {sum(vals)}, expected 1")

    @staticmethod
    def uniform(actions: Iterable[str]) -> "ActionPosterior":
        labels = list(actions)
        p = 1.0 / len(labels)
        return ActionPosterior({a: p for a in labels}, iteration=0)


def _normalized(scores: Mapping[str, float], actions: Sequence[str]) -> dict[str, float]:
    vals = {a: max(float(scores.get(a, 0.0)), 0.0) for a in actions}
    total = sum(vals.values())
    if total <= 0.0:
        return {a: 1.0 / len(actions) for a in actions}
    return {a: v / total for a, v in vals.items()}


def refine(
    posterior: ActionPosterior,
    predictions: Mapping[str, float],
    alpha: float,
) -> ActionPosterior:
    """Blend normalized predictions into the posterior and renormalize."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    actions = sorted(posterior.probs)
    preds = _normalized(predictions, actions)
    mixed = {a: alpha * posterior.probs[a] + (1.0 - alpha) * preds[a] for a in actions}
    total = sum(mixed.values())
    return ActionPosterior(
        {a: v / total for a, v in mixed.items()},
        iteration=posterior.iteration + 1,
    )


@dataclass(frozen=True)
class TargetSet:
    """Aligned (feature, target) training pairs plus the skip count."""

    clip_ids: tuple[str, ...]
    features: np.ndarray  # (n, d_vis)
    targets: np.ndarray   # (n, 300)
    skipped: int


def build_targets(
    rankings: Mapping[str, ClipRanking],
    features: Mapping[str, np.ndarray],
    embeddings: EmbeddingTable,
    k: int = 5,
    temperature: float = 1.0,
) -> TargetSet:
    """Turn clip rankings into unit-norm semantic targets.

    Per clip, the top-k actions by smoothed marginal are weight-averaged in
    embedding space, with weights softmax(-energy / temperature) over their
    clip-level energies. Clips without a feature vector are skipped.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    ids, xs, ys = [], [], []
    skipped = 0
    for clip_id in sorted(rankings):
        f = features.get(clip_id)
        if f is None:
            skipped += 1
            continue
        ranking = rankings[clip_id]
        chosen = sorted(
            ranking.action_marginal.items(), key=lambda t: (-t[1], t[0])
        )[:k]
        energies = np.array([ranking.action_energy[a] for a, _ in chosen])
        logits = -energies / temperature
        logits -= logits.max()
        w = np.exp(logits)
        w /= w.sum()
        emb = embeddings.matrix([a for a, _ in chosen])
        target = w @ emb
        norm = float(np.linalg.norm(target))
        if norm < 1e-12:
            raise DataError(f"degenerate action target for clip {clip_id!r}")
        ids.append(clip_id)
        xs.append(np.asarray(f, dtype=np.float64))
        ys.append(target / norm)
    if ids:
        return TargetSet(tuple(ids), np.stack(xs), np.stack(ys), skipped)
    d = next(iter(features.values())).shape[0] if features else 0
    return TargetSet((), np.empty((0, d)), np.empty((0, EMBEDDING_DIM)), skipped)


def train_projection(
    features: np.ndarray, targets: np.ndarray, ridge: float = 1e-3
) -> ProjectionModel:
    """Closed-form ridge solve of the feature-to-embedding map.

    Minimizes ||XW + b - Y||^2 + ridge * ||W||^2 with an unpenalized
    intercept (handled by centering). A singular normal system with
    ridge = 0 falls back to ridge = 1e-6.
    """
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DataError(f"incompatible training shapes {X.shape} / {Y.shape}")
    if X.shape[0] < 1:
        raise DataError("need at least one training pair")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    d = X.shape[1]
    gram = Xc.T @ Xc + ridge * np.eye(d)
    if ridge == 0.0 and np.linalg.matrix_rank(gram) < d:
        warnings.warn(
            "singular normal system with ridge=0; falling back to ridge=1e-6",
            RuntimeWarning,
        )
        ridge = 1e-6
        gram = Xc.T @ Xc + ridge * np.eye(d)
    weights = np.linalg.solve(gram, Xc.T @ Yc)
    bias = y_mean - x_mean @ weights
    residual = X @ weights + bias - Y
    mse = float(np.mean(residual * residual))
    return ProjectionModel(
        weights=weights, bias=bias, ridge=ridge, iterations=1, train_mse=mse
    )


def predict_actions(
    model: ProjectionModel,
    features: np.ndarray,
    action_vocab: Sequence[str],
    embeddings: EmbeddingTable,
) -> dict[str, float]:
    """Cosine similarity of the projected features to each action embedding,
    rescaled from [-1, 1] to [0, 1]."""
    missing = sorted(a for a in action_vocab if a not in embeddings)
    if missing:
        raise DataError(f"actions missing from embeddings: {', '.join(missing)}")
    proj = model.project(features)
    norm = float(np.linalg.norm(proj))
    if norm < 1e-12:
        return {a: 0.5 for a in action_vocab}
    emb = embeddings.matrix(action_vocab)
    cos = emb @ (proj / norm)
    scores = np.clip((cos + 1.0) / 2.0, 0.0, 1.0)
    return {a: float(s) for a, s in zip(action_vocab, scores)}


def save_projection(model: ProjectionModel, path: str | Path) -> None:
    """Binary model file: u32 magic, u32 d_vis, u32 d_sem, f64 ridge,
    then row-major f64 weights and the bias vector."""
    with open(path, "wb") as fh:
        fh.write(
            struct.pack("<IIId", MODEL_MAGIC, model.feature_dim, EMBEDDING_DIM, model.ridge)
        )
        fh.write(model.weights.astype("<f8").tobytes())
        fh.write(model.bias.astype("<f8").tobytes())


def load_projection(path: str | Path) -> ProjectionModel:
    blob = Path(path).read_bytes()
    header = struct.calcsize("<IIId")
    if len(blob) < header:
        raise ParseError("model file shorter than its header", path=path)
    magic, d_vis, d_sem, ridge = struct.unpack("<IIId", blob[:header])
    if magic != MODEL_MAGIC:
        raise ParseError(f"bad model magic 0x{magic:08x}", path=path)
    if d_sem != EMBEDDING_DIM:
        raise ParseError(f"model embeds into {d_sem}-d, expected {EMBEDDING_DIM}", path=path)
    need = header + 8 * (d_vis * d_sem + d_sem)
    if len(blob) != need:
        raise ParseError(f"model payload is {len(blob)} bytes, expected {need}", path=path)
    flat = np.frombuffer(blob[header:], dtype="<f8")
    weights = flat[: d_vis * d_sem].reshape(d_vis, d_sem).copy()
    bias = flat[d_vis * d_sem:].copy()
    return ProjectionModel(
        weights=weights, bias=bias, ridge=ridge, iterations=0, train_mse=None
    )


# ---------------------------------------------------------------------------
# refinement loop


@dataclass(frozen=True)
class ClipContext:
    """Everything the ranking pipeline needs to re-rank one clip."""

    clip_id: str
    frame_obj_scores: Mapping[int, Mapping[str, float]]
    frame_action_priors: Mapping[int, Mapping[str, float]] | None
    features: np.ndarray | None = None
    truth: tuple[str, str] | None = None


def rank_context(
    ctx: ClipContext,
    cache: AffinityCache,
    posterior_probs: Mapping[str, float] | None = None,
    top_k: int = 5,
    energy_floor: float = 1e-6,
) -> ClipRanking:
    """Rank one clip, using a clip-level posterior over the per-frame priors
    when one is supplied."""
    frame_rankings: list[Ranking] = []
    for f in sorted(ctx.frame_obj_scores):
        if posterior_probs is not None:
            priors = posterior_probs
        elif ctx.frame_action_priors is not None:
            priors = ctx.frame_action_priors[f]
        else:
            priors = None
        frame_rankings.append(
            rank_frame(f, ctx.frame_obj_scores[f], cache, priors, energy_floor)
        )
    return rank_clip(frame_rankings, top_k=top_k, energy_floor=energy_floor)


def split_clips(clip_ids: Iterable[str], val_fraction: float) -> tuple[list[str], list[str]]:
    """Deterministic train/validation split by stable hash of the clip id."""
    train, val = [], []
    for clip_id in sorted(clip_ids):
        digest = hashlib.sha1(clip_id.encode("utf-8")).digest()
        unit = int.from_bytes(digest[:8], "big") / 2**64
        (val if unit < val_fraction else train).append(clip_id)
    return train, val


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    val_mse: float
    action_accuracy: float | None


@dataclass(frozen=True)
class RefinementResult:
    model: ProjectionModel
    posterior: ActionPosterior
    trace: tuple[IterationRecord, ...]
    clip_posteriors: Mapping[str, Mapping[str, float]]
    final_rankings: Mapping[str, ClipRanking]


def _init_clip_posterior(ctx: ClipContext, actions: Sequence[str]) -> dict[str, float]:
    if ctx.frame_action_priors is None:
        return dict(ActionPosterior.uniform(actions).probs)
    sums: dict[str, float] = {a: 0.0 for a in actions}
    for row in ctx.frame_action_priors.values():
        for a in actions:
            sums[a] += row.get(a, 0.0)
    return _normalized(sums, list(actions))


def _action_accuracy(rankings: Mapping[str, ClipRanking], clips: Sequence[ClipContext]) -> float | None:
    total = correct = 0
    for ctx in clips:
        if ctx.truth is None:
            continue
        total += 1
        if rankings[ctx.clip_id].top().action == ctx.truth[0]:
            correct += 1
    return correct / total if total else None


def refinement_loop(
    clips: Sequence[ClipContext],
    cache: AffinityCache,
    embeddings: EmbeddingTable,
    config: EngineConfig,
) -> RefinementResult:
    """Alternate rank -> build targets -> train -> predict -> refine.

    Stops when the relative validation-MSE improvement drops below
    ``config.stop_tol`` or after ``config.max_iterations`` iterations, and
    rolls back to the best accepted state.
    """
    actions = list(cache.actions)
    by_id = {ctx.clip_id: ctx for ctx in clips}
    features = {
        c.clip_id: c.features for c in clips if c.features is not None
    }
    dims = {v.shape[0] for v in features.values()}
    if len(dims) > 1:
        raise DataError(f"inconsistent feature dimensions: {sorted(dims)}")
    train_ids, val_ids = split_clips(by_id, config.val_fraction)
    train_ids = [c for c in train_ids if c in features]
    val_ids = [c for c in val_ids if c in features]
    if not val_ids:
        raise DataError("validation split is empty; no clips with features hashed into it")
    if not train_ids:
        raise DataError("training split is empty")

    clip_post: dict[str, dict[str, float]] = {}
    global_post = ActionPosterior.uniform(actions)
    trace: list[IterationRecord] = []
    best: tuple[float, ProjectionModel, dict, ActionPosterior] | None = None

    for iteration in range(config.max_iterations):
        rankings = {
            ctx.clip_id: rank_context(
                ctx, cache, clip_post.get(ctx.clip_id),
                top_k=config.top_k_actions, energy_floor=config.energy_floor,
            )
            for ctx in clips
        }
        train_set = build_targets(
            {c: rankings[c] for c in train_ids}, features, embeddings,
            k=config.top_k_actions, temperature=config.target_temperature,
        )
        val_set = build_targets(
            {c: rankings[c] for c in val_ids}, features, embeddings,
            k=config.top_k_actions, temperature=config.target_temperature,
        )
        model = train_projection(train_set.features, train_set.targets, config.ridge)
        val_res = model.project(val_set.features) - val_set.targets
        val_mse = float(np.mean(val_res * val_res))
        trace.append(IterationRecord(iteration, val_mse, _action_accuracy(rankings, clips)))

        predictions = {
            clip_id: predict_actions(model, features[clip_id], actions, embeddings)
            for clip_id in sorted(features)
        }
        new_post = {
            clip_id: dict(
                refine(
                    ActionPosterior(
                        clip_post.get(clip_id) or _init_clip_posterior(by_id[clip_id], actions)
                    ),
                    preds,
                    config.blend,
                ).probs
            )
            for clip_id, preds in predictions.items()
        }
        norm_preds = [_normalized(p, actions) for p in predictions.values()]
        mean_pred = {
            a: sum(p[a] for p in norm_preds) / len(norm_preds) for a in actions
        }
        new_global = refine(global_post, mean_pred, config.blend)

        if best is not None:
            prev = best[0]
            improvement = (prev - val_mse) / max(prev, 1e-300)
            if improvement < config.stop_tol:
                break
        best = (val_mse, model, {k: dict(v) for k, v in new_post.items()}, new_global)
        clip_post = new_post
        global_post = new_global

    assert best is not None
    _, model, final_post, final_global = best
    final_rankings = {
        ctx.clip_id: rank_context(
            ctx, cache, final_post.get(ctx.clip_id),
            top_k=config.top_k_actions, energy_floor=config.energy_floor,
        )
        for ctx in clips
    }
    return RefinementResult(
        model=model,
        posterior=final_global,
        trace=tuple(trace),
        clip_posteriors=final_post,
        final_rankings=final_rankings,
    )


def write_trace(trace: Sequence[IterationRecord], path: str | Path) -> None:
    """CSV trace: one row per refinement iteration."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,val_mse,top1_action_acc\n")
        for rec in trace:
            acc = "" if rec.action_accuracy is None else repr(rec.action_accuracy)
            fh.write(f"{rec.iteration},{rec.val_mse!r},{acc}\n")
