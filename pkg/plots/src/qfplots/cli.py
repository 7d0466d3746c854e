"""CLI: render one figure from an experiment CSV."""
from __future__ import annotations

import argparse
import sys

from .figures import FigureError, FigureKind, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="queuefp-plots", description="Render figures from experiment CSV outputs."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", required=True, choices=[k.value for k in FigureKind])
    p.add_argument("--in", dest="infile", required=True, help="input CSV path")
    p.add_argument("--out", required=True, help="output image path (.png/.svg)")
    p.add_argument("--plan", help="plan JSON for theoretical overlays")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        input_csv=args.infile,
        kind=FigureKind(args.kind),
        output=args.out,
        plan_json=args.plan,
    )
    try:
        out = render(spec)
    except (FigureError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
