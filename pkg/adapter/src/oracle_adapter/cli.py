"""CLI: score a frame directory into a likelihood table."""

from __future__ import annotations

import argparse
import logging
import sys

from .gaze import GazeError, read_gaze
from .score import ScoreError, read_aliases, read_vocab, score_clip
from .scorers import make_scorer


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oracle-adapter",
        description="Turn frames + gaze into concept-likelihood tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("score", help="score one clip's frame directory")
    p.add_argument("--frames", required=True, help="directory of frame images")
    p.add_argument("--gaze", help="gaze CSV frame,x,y,valid (optional)")
    p.add_argument("--vocab", required=True, help="vocabulary TSV kind<TAB>label")
    p.add_argument("--out", required=True, help="output *.ltab.jsonl path")
    p.add_argument("--clip", help="clip id (default: frames directory name)")
    p.add_argument("--aliases", help="label alias TSV applied to emitted concepts")
    p.add_argument("--roi", type=float, default=0.5, help="ROI side as a fraction of min(H, W)")
    p.add_argument("--fps", type=float, default=1.0, help="sampling rate in frames per second")
    p.add_argument("--source-fps", type=float, default=30.0, help="rate the frames were extracted at")
    p.add_argument("--temperature", type=float, default=1.0, help="softmax temperature")
    p.add_argument("--scorer", choices=["stub", "clip"], default="stub")
    p.add_argument("--model", help="model checkpoint for --scorer clip")
    p.add_argument("--seed", type=int, default=0, help="seed for --scorer stub")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        gaze = read_gaze(args.gaze) if args.gaze else {}
        vocab = read_vocab(args.vocab)
        aliases = read_aliases(args.aliases) if args.aliases else None
        scorer = make_scorer(args.scorer, args.model, args.seed)
        stats = score_clip(
            frames_dir=args.frames,
            gaze=gaze,
            vocab=vocab,
            scorer=scorer,
            out_path=args.out,
            clip_id=args.clip,
            roi_fraction=args.roi,
            fps=args.fps,
            source_fps=args.source_fps,
            temperature=args.temperature,
            aliases=aliases,
        )
    except (ScoreError, GazeError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"scored {stats.frames_scored} frame(s) -> {args.out} "
        f"(skipped {stats.frames_skipped}, scorer failures {stats.scorer_failures})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
