"""Command line entry points: train a prior on an exported archive, and
apply a trained prior to produce refined volumes for re-import.

Exit codes: 0 success, 1 data error, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ModelConfig, TrainConfig, VARIANTS
from .errors import ConfigError, DataError, TrainingDiverged
from .train import load_prior, refine, save_prior, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icrefine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a refiner on an exported archive")
    p.add_argument("--archive", required=True, help="exported training container")
    p.add_argument("--model-out", required=True, help="path for the trained prior")
    p.add_argument("--variant", default="baseline", choices=list(VARIANTS))
    p.add_argument("--config", default=None, help="JSON with model/train overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--report", default=None, help="write the training report JSON here")

    p = sub.add_parser("refine", help="apply a trained prior to an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--split", default="test", choices=["train", "test", "all"])
    return parser


def run(args) -> int:
    if args.command == "train":
        overrides = {"model": {}, "train": {}}
        if args.config:
            overrides.update(json.loads(open(args.config).read()))
        model_cfg = ModelConfig(variant=args.variant, **overrides.get("model", {}))
        train_kwargs = dict(overrides.get("train", {}), seed=args.seed)
        if args.max_epochs is not None:
            train_kwargs["max_epochs"] = args.max_epochs
        prior = train(model_cfg, TrainConfig(**train_kwargs), args.archive)
        save_prior(prior, args.model_out)
        if args.report:
            with open(args.report, "w") as fh:
                json.dump(prior.provenance, fh, indent=2, sort_keys=True)
        print(
            f"trained {model_cfg.variant} for {prior.provenance['epochs_run']} epochs "
            f"(stop: {prior.provenance['stop_reason']}, "
            f"best val loss {prior.provenance['best_val_loss']:.4f})"
        )
        return 0

    if args.command == "refine":
        prior = load_prior(args.model)
        written = refine(prior, args.archive, args.dest, split=args.split)
        print(f"wrote {len(written)} refined volumes to {args.dest}")
        return 0

    raise ConfigError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
