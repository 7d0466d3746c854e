"""Command-line entry point.

Subcommands: plan, gen-codebook, run, sweep, report. Exit codes: 0 success,
2 config/usage error, 3 infeasible scenario.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import codebook, harness, numerics
from .harness import ConfigError
from .numerics import InfeasibleScenarioError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="queuefp",
        description="Invisible flow-fingerprinting simulator over parallel queues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, help="override run.master_seed")
        p.add_argument("--scenario", type=int, choices=(1, 2), help="override scenario")
        p.add_argument(
            "--desk-scale", type=int, metavar="M_CAP",
            help="cap scenario-2 flow/codebook counts at this value",
        )

    p_plan = sub.add_parser("plan", help="print the derived scenario plan as JSON")
    common(p_plan)
    p_plan.add_argument("--out", help="also write the plan JSON here")

    p_cb = sub.add_parser("gen-codebook", help="generate and save a codebook")
    common(p_cb)
    p_cb.add_argument("--out", required=True, help="binary codebook output path")

    p_run = sub.add_parser("run", help="run Monte-Carlo trials of the full pipeline")
    common(p_run)
    p_run.add_argument("--trials", type=int, help="override run.trials")
    p_run.add_argument("--out", help="output directory (trials.csv, plan.json, summary.json)")
    p_run.add_argument("--workers", type=int, default=1, help="trial worker processes")

    p_sweep = sub.add_parser("sweep", help="plan (and optionally run) over a horizon grid")
    common(p_sweep)
    p_sweep.add_argument("--grid", required=True,
                         help="comma-separated horizons, e.g. 100,200,400")
    p_sweep.add_argument("--trials", type=int, default=0,
                         help="trials per grid point (0 = plan only)")
    p_sweep.add_argument("--out", required=True, help="sweep CSV output path")

    p_rep = sub.add_parser("report", help="summarize a trials.csv into JSON")
    p_rep.add_argument("--in", dest="infile", required=True, help="trials.csv path")
    p_rep.add_argument("--out", help="summary JSON output path (default stdout)")
    return parser


def _load(args: argparse.Namespace) -> harness.ExperimentConfig:
    config = harness.load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "scenario", None) is not None:
        overrides["scenario"] = args.scenario
    if args.command == "run" and getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "desk_scale", None) is not None:
        overrides["desk_m"] = args.desk_scale
    if getattr(args, "out", None) and args.command == "run":
        overrides["out_dir"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenarioError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        summary = harness.summarize_trials_csv(args.infile)
        text = json.dumps(summary, indent=1)
        if args.out:
            Path(args.out).write_text(text)
        else:
            print(text)
        return EXIT_OK

    config = _load(args)

    if args.command == "plan":
        plan = harness.build_plan(config)
        text = json.dumps(plan.to_dict(), indent=1)
        print(text)
        if args.out:
            Path(args.out).write_text(text)
        return EXIT_OK

    if args.command == "gen-codebook":
        plan = harness.build_plan(config)
        from .seeding import derive_seed

        cb = codebook.generate_codebook(
            plan.M, plan.lam, plan.T2, derive_seed(config.master_seed, "codebook")
        )
        codebook.save_codebook(cb, args.out)
        print(f"wrote {plan.M} codewords to {args.out}")
        return EXIT_OK

    if args.command == "run":
        plan, outcomes, report = harness.run_experiment(config, workers=args.workers)
        print(json.dumps(report.to_dict(), indent=1))
        return EXIT_OK

    if args.command == "sweep":
        grid = [float(t) for t in args.grid.split(",") if t.strip()]
        if not grid:
            raise ConfigError("--grid: empty horizon grid")
        rows = harness.sweep_T(config, grid, trials_per_point=args.trials)
        harness.write_sweep_csv(rows, args.out)
        print(f"wrote {len(rows)} sweep rows to {args.out}")
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
