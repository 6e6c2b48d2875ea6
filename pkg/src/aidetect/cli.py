"""Command-line entry point.

Subcommands mirror the pipeline stages; ``run`` chains the usual sequence
(prepare, train, score, calibrate, optimize, evaluate). Exit codes: 0 on
success, 2 for configuration or IO problems, 3 for data-contract
violations, 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import load_config
from .errors import AidetectError
from .pipeline import RunDir, run_lock

STAGE_SEQUENCE = ("prepare", "train", "score", "calibrate", "optimize", "evaluate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aidetect", description=__doc__)
    parser.add_argument("--config", default=None, help="Path to a key=value config file.")
    parser.add_argument("--run-dir", default="run", help="Run directory (default: ./run).")
    parser.add_argument("--seed", type=int, default=None, help="Override run.seed from the config.")
    parser.add_argument("--force", action="store_true", help="Redo stages even when digests match.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("prepare", help="Clean, filter, and split the corpus.")
    sub.add_parser("train", help="Train the language model and the classifier head.")
    score = sub.add_parser("score", help="Score splits with all three detectors.")
    score.add_argument("--split", default="all", choices=["train", "validation", "test", "all"])
    sub.add_parser("calibrate", help="Fit Platt parameters and write score matrices.")
    sub.add_parser("optimize", help="Grid-search ensemble weights on the validation matrix.")
    sub.add_parser("evaluate", help="Evaluate all models on the test matrix.")
    sub.add_parser("ablate", help="Re-optimize with each detector dropped.")
    atk = sub.add_parser("attack", help="Perturb machine-class test text and rescore.")
    atk.add_argument("--name", default=None, help="synonym-swap or sentence-shuffle.")
    atk.add_argument("--rate", type=float, default=None, help="Swap rate for synonym-swap.")
    sub.add_parser("multiseed", help="Repeat the pipeline over eval.seeds and test significance.")
    sub.add_parser("report", help="Print a summary of a finished run.")
    sub.add_parser("run", help="Run prepare through evaluate in order.")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get_int("run.seed")
        rundir = RunDir(args.run_dir)
        with run_lock(rundir):
            if args.command == "run":
                for stage in STAGE_SEQUENCE:
                    _dispatch(stage, cfg, rundir, seed, args)
            else:
                _dispatch(args.command, cfg, rundir, seed, args)
    except AidetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def _dispatch(command: str, cfg, rundir: RunDir, seed: int, args) -> None:
    if command == "prepare":
        pipeline.cmd_prepare(cfg, rundir, seed, args.force)
    elif command == "train":
        pipeline.cmd_train(cfg, rundir, seed, args.force)
    elif command == "score":
        split = getattr(args, "split", "all")
        pipeline.cmd_score(cfg, rundir, seed, split, args.force)
    elif command == "calibrate":
        pipeline.cmd_calibrate(cfg, rundir, seed, args.force)
    elif command == "optimize":
        pipeline.cmd_optimize(cfg, rundir, seed, args.force)
    elif command == "evaluate":
        pipeline.cmd_evaluate(cfg, rundir, seed, args.force)
    elif command == "ablate":
        pipeline.cmd_ablate(cfg, rundir, seed, args.force)
    elif command == "attack":
        pipeline.cmd_attack(cfg, rundir, seed, getattr(args, "name", None), getattr(args, "rate", None), args.force)
    elif command == "multiseed":
        pipeline.cmd_multiseed(cfg, rundir, seed, args.force)
    elif command == "report":
        pipeline.cmd_report(cfg, rundir, seed, args.force)
    else:  # pragma: no cover
        raise AidetectError(f"unknown command {command}")


if __name__ == "__main__":
    raise SystemExit(main())
