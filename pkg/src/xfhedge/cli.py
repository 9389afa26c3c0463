"""Command line interface.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import NumericalError, ValidationError
from .formulation import build
from .sorting_networks import build_network, reflection_sequence
from .verify import run_checks

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    result = harness.run(cfg)
    out = args.out or cfg.output
    if out:
        summary_path = harness.write_result(result, out)
        print(f"wrote {out} and {summary_path}", file=sys.stderr)
    else:
        sys.stdout.write(harness.records_to_csv(result.records))
    print(json.dumps(result.summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _cmd_compare(args) -> int:
    configs, output = harness.load_compare_config(args.config)
    table, results = harness.compare(configs)
    for res in results:
        if res.config.output:
            harness.write_result(res, res.config.output)
    sys.stdout.write(harness.format_table(table))
    out = args.out or output
    if out:
        harness._atomic_write(out, json.dumps(table, indent=2) + "\n")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    if args.what == "network":
        sys.stdout.write(build_network(args.kind, args.n).dumps())
    else:
        sys.stdout.write(build(reflection_sequence(args.kind, args.n)).dumps())
    return EXIT_OK


def _cmd_verify(args) -> int:
    checks = run_checks(args.n, seed=args.seed)
    for chk in checks:
        print(f"{'PASS' if chk.ok else 'FAIL'} {chk.name} {chk.detail}".rstrip())
    return EXIT_OK if all(c.ok for c in checks) else EXIT_NUMERICAL


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xfhedge", description="XF-Hedge experiments for learning permutations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, help="CSV path (overrides config 'output')")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run several configs on a shared loss stream")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, help="write the comparison table as JSON")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("inspect", help="print a network or its extended formulation")
    p.add_argument("what", choices=["network", "formulation"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["bubble", "batcher"], default="batcher")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("verify", help="check the invariants at size N")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
