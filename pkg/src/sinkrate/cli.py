"""Command line: ``sinkrate run --config FILE --out DIR`` and ``sinkrate check --config FILE``."""

from __future__ import annotations

import argparse
import sys

from .runner import batch
from .scenario import ScenarioError, load_config

EXIT_INVALID = 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sinkrate", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve every scenario and write reports")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--plots", action="store_true",
                   help="also render rates.png next to each trace (off by default)")
    c = sub.add_parser("check", help="validate a config without running it")
    c.add_argument("--config", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenarios = load_config(args.config)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "check":
        print(f"ok: {len(scenarios)} scenario(s)")
        return 0
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    code = batch(scenarios, args.out, args.jobs, args.plots)
    if code:
        print(f"one or more scenarios failed; see {args.out}/summary.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
