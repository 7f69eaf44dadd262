"""Command-line entry point.

Subcommands: ``run`` (full pipeline), ``refine`` (pipeline plus the
posterior refinement loop), ``evaluate`` (score a prediction dump),
``affinity-build`` (precompute the pair-affinity cache), and ``synth``
(generate a seeded synthetic world).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EngineConfig, load_config
from .errors import EngineError
from .harness import evaluate, run, write_report
from .inference import read_top1_predictions
from .oracle_io import read_manifest
from .semantic import save_projection, write_trace
from .synth import SyntheticWorldSpec, generate_world


def _add_engine_flags(p: argparse.ArgumentParser, need_embeddings: bool) -> None:
    p.add_argument("--manifest", required=True, help="manifest.json of the clip set")
    p.add_argument("--kb", required=True, help="knowledge-graph edge dump (TSV)")
    p.add_argument(
        "--embeddings",
        required=need_embeddings,
        help="concept embedding file (label + 300 values per line)",
    )
    p.add_argument("--aliases", help="dataset-to-canonical label alias file (TSV)")
    p.add_argument("--config", help="engine config TOML")
    p.add_argument("--cache", help="affinity cache file (loaded if present, else written)")
    p.add_argument("--out", required=True, help="output directory")


def _engine_config(args) -> EngineConfig:
    return load_config(args.config) if args.config else EngineConfig()


def _cmd_run(args) -> int:
    result = run(
        manifest_path=args.manifest,
        kb_path=args.kb,
        embeddings_path=args.embeddings,
        aliases_path=args.aliases,
        config=_engine_config(args),
        cache_path=args.cache,
        out_dir=args.out,
        refine=False,
    )
    _print_summary(result)
    return 0


def _cmd_refine(args) -> int:
    result = run(
        manifest_path=args.manifest,
        kb_path=args.kb,
        embeddings_path=args.embeddings,
        aliases_path=args.aliases,
        config=_engine_config(args),
        cache_path=args.cache,
        out_dir=args.out,
        refine=True,
    )
    out = Path(args.out)
    ref = result.refinement
    save_projection(ref.model, out / "model.bin")
    write_trace(ref.trace, out / "trace.csv")
    (out / "posterior.json").write_text(
        json.dumps(
            {"iteration": ref.posterior.iteration, "probs": dict(sorted(ref.posterior.probs.items()))},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    _print_summary(result)
    print(f"refinement: {len(ref.trace)} iteration(s), final val MSE {ref.trace[-1].val_mse:.3e}")
    return 0


def _print_summary(result) -> None:
    print(f"clips scored: {len(result.predictions)}, failed: {len(result.failures)}")
    print(f"search space: {result.search_space} activities")
    if result.report is not None:
        for name, m in (
            ("object", result.report.object_top1),
            ("action", result.report.action_top1),
            ("activity", result.report.activity_top1),
        ):
            print(f"top-1 {name}: {m.correct}/{m.total} = {100 * m.accuracy:.2f}%")


def _cmd_evaluate(args) -> int:
    predictions = read_top1_predictions(args.predictions)
    truths = {
        e.clip_id: e.truth
        for e in read_manifest(args.manifest)
        if e.truth is not None
    }
    report = evaluate(predictions, truths)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.json", "json")
    write_report(report, out / "report.csv", "csv")
    for name, m in (
        ("object", report.object_top1),
        ("action", report.action_top1),
        ("activity", report.activity_top1),
    ):
        print(f"top-1 {name}: {m.correct}/{m.total} = {100 * m.accuracy:.2f}%")
    return 0


def _cmd_affinity_build(args) -> int:
    # reuse the run loader path: build via run() would score clips too, so
    # load pieces directly instead
    from .affinity import build_affinity_matrix
    from .harness import _derive_vocab
    from .kb import load_aliases, load_edges
    from .oracle_io import read_likelihoods

    config = _engine_config(args)
    graph = load_edges(args.kb, config.relation_whitelist)
    aliases = load_aliases(args.aliases) if args.aliases else None
    tables = {
        e.clip_id: read_likelihoods(e.likelihoods, clip_id=e.clip_id, aliases=aliases)
        for e in read_manifest(args.manifest)
    }
    actions, objects = _derive_vocab(tables)
    cache = build_affinity_matrix(
        graph, actions, objects, config.decay, config.max_hops, config.affinity_floor
    )
    cache.save(args.cache)
    print(f"affinity cache: {len(actions)} x {len(objects)} -> {args.cache}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticWorldSpec(
        actions=args.actions,
        objects=args.objects,
        evidence_per_object=args.evidence,
        noise=args.noise,
        clips_per_activity=args.clips_per_activity,
        seed=args.seed,
        plant_mode=args.mode,
        frames_per_clip=args.frames,
        feature_dim=args.feature_dim,
        max_clips=args.max_clips,
    )
    paths = generate_world(spec, args.out)
    print(f"world written to {paths.root} ({spec.plant_mode}, noise={spec.noise})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="openact",
        description="Open-world activity inference over concept-likelihood tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="ground, rank, and evaluate a manifest")
    _add_engine_flags(p_run, need_embeddings=False)
    p_run.set_defaults(fn=_cmd_run)

    p_ref = sub.add_parser("refine", help="run with the posterior refinement loop")
    _add_engine_flags(p_ref, need_embeddings=True)
    p_ref.set_defaults(fn=_cmd_refine)

    p_eval = sub.add_parser("evaluate", help="score a prediction dump against truth")
    p_eval.add_argument("--predictions", required=True, help="ranking dump (JSONL)")
    p_eval.add_argument("--manifest", required=True, help="manifest.json with truth")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.set_defaults(fn=_cmd_evaluate)

    p_aff = sub.add_parser("affinity-build", help="precompute the affinity cache")
    p_aff.add_argument("--kb", required=True)
    p_aff.add_argument("--manifest", required=True)
    p_aff.add_argument("--aliases")
    p_aff.add_argument("--config")
    p_aff.add_argument("--cache", required=True, help="cache output path")
    p_aff.set_defaults(fn=_cmd_affinity_build)

    p_synth = sub.add_parser("synth", help="generate a synthetic world")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--actions", type=int, default=5)
    p_synth.add_argument("--objects", type=int, default=8)
    p_synth.add_argument("--evidence", type=int, default=2)
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--clips-per-activity", type=int, default=5)
    p_synth.add_argument("--mode", choices=["exclusive", "uniform"], default="exclusive")
    p_synth.add_argument("--frames", type=int, default=4)
    p_synth.add_argument("--feature-dim", type=int, default=64)
    p_synth.add_argument("--max-clips", type=int, default=None)
    p_synth.set_defaults(fn=_cmd_synth)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
