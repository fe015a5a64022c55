"""
Command line front end.

    ellsrc run --preset example1_lshape --out out/
    ellsrc weights --preset example1_square --out out/
    ellsrc decay --preset example1_square --j 27 --out out/
    ellsrc radii --preset example5_radii --out out/
    ellsrc spectrum --config my.json --out out/
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .experiments import PRESET_NAMES, ExperimentConfig, build_setup, load_config, preset, run_experiment
from .inversion import METHODS
from .spectral import decay_profile, decompose, weight_operator, write_spectrum_csv


def _config(args) -> ExperimentConfig:
    if args.config is None and args.preset is None:
        raise SystemExit("error: give --preset or --config")
    base = preset(args.preset) if args.preset else None
    cfg = load_config(args.config, base) if args.config else base
    overrides = {}
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    if args.rank_tol is not None:
        overrides["rank_tol"] = args.rank_tol
    if getattr(args, "method", None):
        overrides["methods"] = args.method
    return cfg.with_overrides(**overrides) if overrides else cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spectral(cfg):
    setup = build_setup(cfg)
    decomp = decompose(setup.op, cfg.rank_tol)
    return setup, decomp


def cmd_run(args) -> dict:
    cfg = _config(args)
    report = run_experiment(cfg, _out(args))
    return {"report": report.files["report"], "rank": report.rank, "rank_tol": report.rank_tol,
            "localization": {m: r.distances for m, r in report.methods.items()}}


def cmd_weights(args) -> dict:
    cfg = _config(args)
    setup, decomp = _spectral(cfg)
    weights = weight_operator(decomp, cfg.weight_floor)
    path = _out(args) / f"{cfg.name}_weights.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "x", "y", "weight"])
        for i, ((x, y), v) in enumerate(zip(setup.grid.centers, weights.w)):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])
    return {"weights": str(path), "rank": decomp.rank, "rank_tol": decomp.tol, **weights.summary()}


def cmd_decay(args) -> dict:
    cfg = _config(args)
    setup, decomp = _spectral(cfg)
    weights = weight_operator(decomp, cfg.weight_floor)
    profile = decay_profile(decomp, weights, args.j, setup.grid)
    path = _out(args) / f"{cfg.name}_decay_{args.j}.csv"
    profile.to_csv(path)
    return {"decay": str(path), "j": args.j, "rank": decomp.rank}


def cmd_radii(args) -> dict:
    cfg = _config(args)
    if cfg.radii is None:
        cfg = cfg.with_overrides(radii={})
    report = run_experiment(cfg, _out(args))
    res = report.radii["result"]
    return {"radii": report.files["radii"], "report": report.files["report"],
            "centers": res["centers"].tolist(), "values": res["radii"].tolist(),
            "objective": res["objective"]}


def cmd_spectrum(args) -> dict:
    cfg = _config(args)
    _, decomp = _spectral(cfg)
    path = _out(args) / f"{cfg.name}_spectrum.csv"
    write_spectrum_csv(decomp, path)
    return {"spectrum": str(path), "rank": decomp.rank, "rank_tol": decomp.tol}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ellsrc", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--config", help="JSON experiment config (overrides the preset)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--rank-tol", type=float, dest="rank_tol")
        return p

    run = common(sub.add_parser("run", help="full pipeline with exports"))
    run.add_argument("--alpha", type=float)
    run.add_argument("--method", action="append", choices=METHODS,
                     help="restrict to this method (repeatable)")
    run.set_defaults(func=cmd_run)

    common(sub.add_parser("weights", help="write the diagonal weights")).set_defaults(func=cmd_weights)

    decay = common(sub.add_parser("decay", help="decay profile of one basis recovery"))
    decay.add_argument("--j", type=int, required=True)
    decay.set_defaults(func=cmd_decay)

    radii = common(sub.add_parser("radii", help="peak detection and disk radius fitting"))
    radii.add_argument("--alpha", type=float)
    radii.set_defaults(func=cmd_radii)

    common(sub.add_parser("spectrum", help="relative singular values")).set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except (ValueError, RuntimeError, IndexError, OSError) as exc:
        print(f"ellsrc {args.command}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
