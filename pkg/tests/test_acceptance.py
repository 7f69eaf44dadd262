"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Tolerances are pinned here and nowhere else."""

import functools
import math
import time

import networkx as nx
import numpy as np

from openact import (
    EngineConfig,
    Generator,
    LikelihoodTable,
    MetricCount,
    SyntheticWorldSpec,
    build_affinity_matrix,
    evaluate,
    evidence_likelihood,
    generate_world,
    ground_objects,
    path_affinity,
    rank_clip,
    rank_frame,
    run,
    train_projection,
)
from openact.affinity import enumerate_paths
from openact.kb import EgoGraph
from openact.semantic import refinement_loop

from conftest import graph_from, load_world


def _criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}")
                raise
            print(f"[PASS] {name}")

        return wrapper

    return deco


@_criterion("synthetic end-to-end: sigma=0 world scores 100% activity in <10s")
def test_synthetic_end_to_end(tmp_path):
    started = time.monotonic()
    spec = SyntheticWorldSpec(actions=5, objects=8, clips_per_activity=7, seed=42)
    paths = generate_world(spec, tmp_path / "world")
    result = run(paths.manifest, paths.edges, out_dir=tmp_path / "out")
    elapsed = time.monotonic() - started
    assert result.report.activity_top1.total >= 50
    assert result.report.activity_top1.accuracy == 1.0
    assert not result.failures
    assert elapsed < 10.0, f"took {elapsed:.1f}s"


@_criterion("noise monotonicity: accuracy non-increasing over sigma 0/0.3/0.6 in <60s")
def test_noise_monotonicity(tmp_path):
    started = time.monotonic()
    accuracies = []
    reports = []
    for sigma in (0.0, 0.3, 0.6):
        spec = SyntheticWorldSpec(
            actions=5, objects=8, clips_per_activity=5, seed=7,
            noise=sigma, plant_mode="uniform",
        )
        paths = generate_world(spec, tmp_path / f"w{sigma}")
        result = run(paths.manifest, paths.edges)
        assert result.report.activity_top1.total == 200
        accuracies.append(result.report.activity_top1.accuracy)
        reports.append(result.report)
    elapsed = time.monotonic() - started
    for lo_sigma, hi_sigma in ((0, 1), (1, 2)):
        assert accuracies[hi_sigma] <= accuracies[lo_sigma] + 0.03, accuracies
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    # coupling holds on every run (see evaluation-arithmetic criterion too)
    for report in reports:
        assert report.activity_top1.correct <= min(
            report.object_top1.correct, report.action_top1.correct
        )


def _nx_oracle(g, a, b, decay, max_hops):
    G = nx.Graph()
    G.add_nodes_from(g.labels)
    for u in g.labels:
        for v, w, _rel in g.neighbors(u):
            G.add_edge(u, v, weight=w)
    scored = {}
    for nodes in nx.all_simple_paths(G, a, b, cutoff=max_hops):
        total = 0.0
        for k in range(1, len(nodes)):
            total += math.exp(-decay * k) * G[nodes[k - 1]][nodes[k]]["weight"]
        scored[tuple(nodes)] = total
    return scored


@_criterion("path search equals exhaustive enumeration on 100 random graphs")
def test_path_search_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        n = int(rng.integers(4, 13))
        records = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.35:
                    w = round(float(rng.uniform(0.05, 2.0)), 4)
                    rel = ["RelatedTo", "UsedFor", "CapableOf"][int(rng.integers(3))]
                    records.append((f"n{i}", rel, f"n{j}", w))
        if not records:
            records.append(("n0", "RelatedTo", "n1", 1.0))
        g = graph_from(records)
        decay = float(rng.uniform(0.0, 1.0))
        max_hops = int(rng.integers(1, 5))
        labels = list(g.labels)
        for _ in range(6):
            a, b = rng.choice(labels, size=2, replace=False)
            mine = {
                p.nodes: p.total for p in enumerate_paths(g, a, b, decay, max_hops)
            }
            oracle = _nx_oracle(g, a, b, decay, max_hops)
            assert mine.keys() == oracle.keys(), (trial, a, b)
            for key, total in oracle.items():
                assert mine[key] == total, (trial, a, b, key)
            best = max(oracle.values()) if oracle else 0.0
            assert path_affinity(g, a, b, decay, max_hops) == best


def _invariance_world(rng):
    # all likelihoods in [0.3, 1] so no energy floor engages down to c=0.1
    g = graph_from(
        [
            ("cut", "UsedFor", "knife", 2.0),
            ("cut", "UsedFor", "board", 1.2),
            ("stir", "UsedFor", "spoon", 1.8),
            ("stir", "UsedFor", "bowl", 1.1),
            ("pour", "UsedFor", "bowl", 1.5),
            ("knife", "RelatedTo", "blade", 1.0),
            ("spoon", "RelatedTo", "bowl", 0.7),
            ("board", "RelatedTo", "blade", 0.4),
        ]
    )
    actions = ["cut", "pour", "stir"]
    objects = ["board", "bowl", "knife", "spoon"]
    cache = build_affinity_matrix(g, actions, objects, 0.5, 3)
    concepts = objects + ["blade"] + actions
    kinds = {}
    for c in objects:
        kinds[c] = "object"
    kinds["blade"] = "evidence"
    for c in actions:
        kinds[c] = "action"
    rows = {
        f: {c: 0.3 + 0.7 * float(rng.random()) for c in concepts} for f in range(5)
    }
    table = LikelihoodTable("clip", rows, kinds)
    return g, cache, actions, objects, table


def _order(ranking):
    return [(c.action, c.object) for c in ranking.items]


@_criterion("energy argmin invariance under likelihood scaling c in {0.9, 0.5, 0.1}")
def test_energy_argmin_invariance():
    rng = np.random.default_rng(17)
    g, cache, actions, objects, table = _invariance_world(rng)
    vocab = [Generator(o, "object", i) for i, o in enumerate(objects)]

    def orders_for(t):
        hyps = ground_objects(t, vocab, g, max_evidence=3)
        frame_orders, frame_rankings = [], []
        for f in t.frames:
            scores = {h.object.label: h.frame_scores[f] for h in hyps}
            priors = {a: t.rows[f][a] for a in actions}
            ranking = rank_frame(f, scores, cache, priors)
            frame_orders.append(_order(ranking))
            frame_rankings.append(ranking)
        clip_order = _order(rank_clip(frame_rankings))
        return frame_orders, clip_order

    base_frames, base_clip = orders_for(table)
    for c in (0.9, 0.5, 0.1):
        frames, clip = orders_for(table.scaled(c))
        assert frames == base_frames, f"frame order changed at c={c}"
        assert clip == base_clip, f"clip order changed at c={c}"


@_criterion("grounding formula: hand example to 1e-12 plus 1000 randomized properties")
def test_grounding_formula_checks():
    ego = EgoGraph(
        center=Generator("obj", "object", 0),
        evidence=(
            (Generator("e1", "evidence", 1), 0.6),
            (Generator("e2", "evidence", 2), 0.4),
        ),
        relations=("RelatedTo", "RelatedTo"),
    )
    row = {"obj": 0.8, "e1": 0.5, "e2": 0.25}
    assert abs(evidence_likelihood(ego, row) - 0.128) <= 1e-12

    rng = np.random.default_rng(31)
    for _ in range(1000):
        m = int(rng.integers(1, 7))
        raw = rng.uniform(0.05, 1.0, size=m)
        priors = raw / raw.sum()
        ego = EgoGraph(
            center=Generator("obj", "object", 0),
            evidence=tuple(
                (Generator(f"e{i}", "evidence", i + 1), float(p))
                for i, p in enumerate(priors)
            ),
            relations=tuple("RelatedTo" for _ in range(m)),
        )
        likes = rng.uniform(0.0, 1.0, size=m)
        center = float(rng.uniform(0.0, 1.0))
        row = {"obj": center, **{f"e{i}": float(likes[i]) for i in range(m)}}
        value = evidence_likelihood(ego, row)
        assert 0.0 <= value <= center + 1e-15

        i = int(rng.integers(m))
        bumped = dict(row)
        bumped[f"e{i}"] = min(1.0, row[f"e{i}"] + float(rng.uniform(0, 1)))
        assert evidence_likelihood(ego, bumped) >= value - 1e-15


@_criterion("projection recovery: planted map < 1e-8 MSE; GD oracle agrees < 1e-6")
def test_projection_recovery():
    rng = np.random.default_rng(8)
    d_vis, n = 10, 50
    w0 = rng.standard_normal((d_vis, 300))
    b0 = rng.standard_normal(300)
    X = rng.standard_normal((n, d_vis))
    Y = X @ w0 + b0
    model = train_projection(X, Y, ridge=0.0)
    assert model.train_mse < 1e-8

    n2, d2, mu = 20, 5, 0.02
    X2 = rng.standard_normal((n2, d2))
    Y2 = rng.standard_normal((n2, 300)) * 0.4
    W = np.zeros((d2, 300))
    b = np.zeros(300)
    aug = np.hstack([X2, np.ones((n2, 1))])
    lr = 1.0 / (2 * (np.linalg.eigvalsh(aug.T @ aug).max() + mu))
    for _ in range(300_000):
        resid = X2 @ W + b - Y2
        grad_w = 2 * (X2.T @ resid) + 2 * mu * W
        grad_b = 2 * resid.sum(axis=0)
        W -= lr * grad_w
        b -= lr * grad_b
        if max(np.abs(grad_w).max(), np.abs(grad_b).max()) < 1e-11:
            break
    closed = train_projection(X2, Y2, ridge=mu)
    assert np.max(np.abs(closed.weights - W)) < 1e-6
    assert np.max(np.abs(closed.bias - b)) < 1e-6


def _accepted_val_mses(trace, stop_tol):
    accepted = [trace[0].val_mse]
    for rec in trace[1:]:
        best = accepted[-1]
        if (best - rec.val_mse) / max(best, 1e-300) >= stop_tol:
            accepted.append(rec.val_mse)
    return accepted


@_criterion("refinement loop: terminates, accepted val-MSE non-increasing, "
            "accuracy never degrades on sigma=0 worlds")
def test_refinement_loop(tmp_path):
    config = EngineConfig()
    worlds = [
        SyntheticWorldSpec(actions=5, objects=8, clips_per_activity=7, seed=42),
        SyntheticWorldSpec(actions=4, objects=6, clips_per_activity=8, seed=3,
                           plant_mode="uniform"),
        SyntheticWorldSpec(actions=5, objects=8, clips_per_activity=7, seed=11,
                           noise=0.3),
    ]
    for idx, spec in enumerate(worlds):
        paths = generate_world(spec, tmp_path / f"w{idx}")
        _, embeddings, cache, contexts = load_world(paths, config)
        result = refinement_loop(contexts, cache, embeddings, config)
        assert 1 <= len(result.trace) <= config.max_iterations
        accepted = _accepted_val_mses(result.trace, config.stop_tol)
        assert accepted == sorted(accepted, reverse=True)
        if spec.noise == 0.0:
            truth = {ctx.clip_id: ctx.truth for ctx in contexts}
            correct = sum(
                result.final_rankings[c].top().action == truth[c][0] for c in truth
            )
            final_acc = correct / len(truth)
            assert final_acc >= result.trace[0].action_accuracy


@_criterion("evaluation arithmetic: 4-clip case is exactly 50/75/50 with coupling")
def test_evaluation_arithmetic():
    report = evaluate(
        {
            "c1": ("cut", "knife"),
            "c2": ("stir", "bowl"),
            "c3": ("pour", "cup"),
            "c4": ("shake", "pan"),
        },
        {
            "c1": ("cut", "knife"),
            "c2": ("stir", "bowl"),
            "c3": ("pour", "glass"),
            "c4": ("open", "jar"),
        },
    )
    assert report.object_top1 == MetricCount(2, 4)
    assert report.action_top1 == MetricCount(3, 4)
    assert report.activity_top1 == MetricCount(2, 4)
    assert report.object_top1.accuracy == 0.5
    assert report.action_top1.accuracy == 0.75
    assert report.activity_top1.accuracy == 0.5
    for row in report.per_clip:
        assert row["activity_correct"] == (
            row["object_correct"] and row["action_correct"]
        )


@_criterion("search-space reporting: 10x38 vocab -> 380, 97x300 vocab -> 29100")
def test_search_space_reporting(tmp_path):
    gaze_spec = SyntheticWorldSpec(
        actions=10, objects=38, clips_per_activity=1, seed=1,
        frames_per_clip=2, max_clips=2,
    )
    paths = generate_world(gaze_spec, tmp_path / "gaze")
    result = run(paths.manifest, paths.edges)
    assert result.search_space == 380
    assert result.report.search_space == 380

    epic_spec = SyntheticWorldSpec(
        actions=97, objects=300, clips_per_activity=1, seed=2,
        frames_per_clip=2, max_clips=2,
    )
    paths = generate_world(epic_spec, tmp_path / "epic")
    result = run(paths.manifest, paths.edges)
    assert result.search_space == 29100
    assert result.report.search_space == 29100
