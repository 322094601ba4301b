"""Command-line interface.

Subcommands: gen, simulate, reconstruct, export, import-refined, eval,
plotdata, sweep.  Exit codes: 0 success, 1 domain error, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

from .circuits import CircuitParams
from .errors import ConfigError, DomainError
from .formats import atomic_write_json, read_json
from .geometry import Geometry, Spectrum
from .pipeline import Condition, METHODS, Workspace, plot_rows
from .recon import SolverConfig


def _load_config(path: str | None, desk_scale: bool) -> dict:
    if path:
        try:
            return read_json(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    name = "desk.json" if desk_scale else "reference.json"
    return json.loads(resources.files("icbench").joinpath(f"configs/{name}").read_text())


def _condition(cfg: dict, args, photons: float, method: str = "ml") -> Condition:
    counts = cfg.get("counts", {})
    return Condition(
        photons_per_ray=photons,
        geometry=Geometry.from_dict(cfg["geometry"]),
        spectrum=Spectrum.from_dict(cfg["spectrum"]),
        train=args.train if args.train is not None else counts.get("train", 1800),
        test=args.test if args.test is not None else counts.get("test", 200),
        master_seed=args.seed,
        method=method,
    )


def _circuit_params(cfg: dict, seed: int) -> CircuitParams:
    return CircuitParams(**cfg.get("circuit_params", {}), seed=seed)


def _solver(cfg: dict) -> SolverConfig:
    return SolverConfig(**cfg.get("solver", {}))


def _add_common(p: argparse.ArgumentParser, photons: bool = True):
    p.add_argument("--out", required=True, help="workspace directory")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--desk-scale", action="store_true",
                   help="use the small bundled profile instead of the reference one")
    p.add_argument("--train", type=int, default=None, help="override train count")
    p.add_argument("--test", type=int, default=None, help="override test count")
    if photons:
        p.add_argument("--photons", type=float, required=True, help="photons per ray")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate ground-truth circuits and a manifest")
    _add_common(p, photons=False)
    p.add_argument("--force", action="store_true", help="overwrite a mismatched manifest")

    p = sub.add_parser("simulate", help="simulate noisy radiographs for a photon budget")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="maximum-likelihood reconstruction")
    _add_common(p)

    p = sub.add_parser("export", help="write a training container for the refiner")
    _add_common(p)
    p.add_argument("--dest", required=True)
    p.add_argument("--split", choices=["train", "test", "both"], default="both")

    p = sub.add_parser("import-refined", help="register refined volumes under a method tag")
    _add_common(p)
    p.add_argument("--src", required=True)
    p.add_argument("--method", required=True, choices=[m for m in METHODS if m != "ml"])

    p = sub.add_parser("eval", help="score the test split and append sweep rows")
    _add_common(p)
    p.add_argument("--method", default="ml", choices=list(METHODS))

    p = sub.add_parser("plotdata", help="emit BER-vs-photons rows as CSV/JSON")
    _add_common(p, photons=False)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", dest="json_out", default=None)

    p = sub.add_parser("sweep", help="gen+simulate+reconstruct+eval over photon budgets")
    _add_common(p, photons=False)
    p.add_argument("--photons", required=True,
                   help="comma-separated photon budgets, e.g. 320,640,5000")
    p.add_argument("--force", action="store_true")
    return parser


def run(args) -> int:
    cfg = _load_config(args.config, args.desk_scale)
    ws = Workspace(args.out)

    if args.command == "gen":
        counts = cfg.get("counts", {})
        train = args.train if args.train is not None else counts.get("train", 1800)
        test = args.test if args.test is not None else counts.get("test", 200)
        manifest = ws.generate(
            _circuit_params(cfg, args.seed), train, test, args.seed, force=args.force
        )
        print(f"wrote {len(manifest['samples'])} circuits under {ws.root}")
        return 0

    if args.command == "simulate":
        cond = _condition(cfg, args, args.photons)
        written = ws.simulate(cond)
        print(f"wrote {len(written)} radiograph sets for condition {cond.hash}")
        return 0

    if args.command == "reconstruct":
        cond = _condition(cfg, args, args.photons)
        written = ws.reconstruct(cond, _solver(cfg), workers=args.workers)
        print(f"wrote {len(written)} approximants for condition {cond.hash}")
        return 0

    if args.command == "export":
        cond = _condition(cfg, args, args.photons)
        index = ws.export(cond, args.dest, split=args.split)
        print(f"exported {len(index['pairs'])} pairs to {args.dest}")
        return 0

    if args.command == "import-refined":
        cond = _condition(cfg, args, args.photons)
        registered = ws.import_refined(cond, args.src, args.method)
        print(f"registered {len(registered)} refined volumes as {args.method}")
        return 0

    if args.command == "eval":
        cond = _condition(cfg, args, args.photons)
        report = ws.evaluate(cond, method=args.method)
        print(json.dumps({
            "photons_per_ray": args.photons, "method": args.method,
            "eta_avg": report.eta_avg, "threshold": report.threshold,
            "mean_errors_per_sample": sum(report.per_sample_errors) / len(report.per_sample_errors),
        }, indent=2))
        return 0

    if args.command == "plotdata":
        rows = plot_rows(ws.sweep_rows())
        if not rows:
            raise DomainError("no sweep rows; run `eval` first")
        json_path = Path(args.json_out) if args.json_out else ws.root / "plotdata.json"
        csv_path = Path(args.csv) if args.csv else ws.root / "plotdata.csv"
        atomic_write_json(json_path, rows)
        fieldnames = ["photons_per_ray", "method", "mean_ber", "stderr", "n_repeats"]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {json_path} and {csv_path} ({len(rows)} rows)")
        return 0

    if args.command == "sweep":
        budgets = [float(tok) for tok in args.photons.split(",") if tok]
        if not budgets:
            raise ConfigError("no photon budgets given")
        counts = cfg.get("counts", {})
        train = args.train if args.train is not None else counts.get("train", 1800)
        test = args.test if args.test is not None else counts.get("test", 200)
        ws.generate(_circuit_params(cfg, args.seed), train, test, args.seed, force=args.force)
        for photons in budgets:
            cond = _condition(cfg, args, photons)
            ws.simulate(cond)
            ws.reconstruct(cond, _solver(cfg), workers=args.workers)
            report = ws.evaluate(cond, method="ml")
            print(f"photons={photons:g} ml BER={report.eta_avg:.6g}")
        return 0

    raise ConfigError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
