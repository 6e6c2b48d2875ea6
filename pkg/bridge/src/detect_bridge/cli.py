"""Command line: ``bridge score --detector m1|m2 --corpus PATH --out PATH``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .records import BridgeJob


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    score = sub.add_parser("score", help="Score a corpus with one detector.")
    score.add_argument("--detector", required=True, choices=["m1", "m2"])
    score.add_argument("--corpus", required=True, help="Corpus JSONL with id/text fields.")
    score.add_argument("--out", required=True, help="Output score-record JSONL path.")
    score.add_argument("--model", required=True, help="Model path or hub identifier.")
    score.add_argument("--infill-model", default=None, help="Fill-mask model for m2 (defaults to --model).")
    score.add_argument("--k", type=int, default=20, help="Perturbation count for m2.")
    score.add_argument("--mask-rate", type=float, default=0.15, help="Masked word fraction for m2.")
    score.add_argument("--seed", type=int, default=0)
    score.add_argument("--batch-size", type=int, default=8)
    score.add_argument("--device", default="cpu")
    score.add_argument("--log-perturbations", action="store_true", help="Write perturbed texts to a sidecar log.")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = BridgeJob(
        corpus=Path(args.corpus),
        detector_id=args.detector,
        model=args.model,
        out=Path(args.out),
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        if args.detector == "m1":
            from .m1 import bridge_score_m1

            bridge_score_m1(job, seed=args.seed)
        else:
            from .m2 import bridge_score_m2

            bridge_score_m2(
                job,
                k=args.k,
                mask_rate=args.mask_rate,
                seed=args.seed,
                infill_model_id=args.infill_model,
                log_perturbations=args.log_perturbations,
            )
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
