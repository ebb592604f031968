"""Command-line front end: `fmbench run` and `fmbench verify`.

Exit codes: 0 success, 1 benchmark/differential failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (DEFAULT_SEED, BenchConfig, BenchError, emit_report,
                    run_experiment)
from .oracle import differential_check, make_differential_ops


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmbench",
        description="Benchmark and verify flash-friendly trees against a "
                    "rewrite-based B-tree baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the paired benchmark and emit a report")
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--trials", type=int, default=4)
    run.add_argument("--baseline-inserts", type=int, default=1000,
                     help="setup inserts at the start of each trial")
    run.add_argument("--ops", type=int, default=10000,
                     help="mixed insert/delete ops after setup")
    run.add_argument("--insert-fraction", type=float, default=0.5)
    run.add_argument("--q", type=int, default=8, help="cell levels per flash cell")
    run.add_argument("--blocks", type=int, default=4096)
    run.add_argument("--slots-per-node", type=int, default=16)
    run.add_argument("--key-bits", type=int, default=32)
    run.add_argument("--payload-bits", type=int, default=32)
    run.add_argument("--gc-fraction", type=float, default=0.25,
                     help="barren-block fraction that triggers a rebuild")
    run.add_argument("--always-erase-on-rewrite", action="store_true",
                     help="make the baseline erase before every node rewrite")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--out", default=None, help="report path (default stdout)")

    verify = sub.add_parser(
        "verify", help="differential-test both trees against a reference model")
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="base seed; seed i of N derives from it")
    verify.add_argument("--seeds", type=int, default=10,
                        help="number of independent op sequences")
    verify.add_argument("--ops", type=int, default=10000,
                        help="ops per sequence")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = BenchConfig(
            seed=args.seed,
            baseline_inserts=args.baseline_inserts,
            mixed_ops=args.ops,
            trials=args.trials,
            insert_fraction=args.insert_fraction,
            q=args.q,
            blocks=args.blocks,
            slots_per_node=args.slots_per_node,
            key_bits=args.key_bits,
            payload_bits=args.payload_bits,
            gc_barren_fraction=args.gc_fraction,
            always_erase_on_rewrite=args.always_erase_on_rewrite,
            report_format=args.format,
        )
    except ValueError as exc:
        print(f"fmbench: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(config)
        emit_report(report, config.report_format, args.out)
    except BenchError as exc:
        print(f"fmbench: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    if args.seeds < 1 or args.ops < 1:
        print("fmbench: --seeds and --ops must be >= 1", file=sys.stderr)
        return 2
    failures = 0
    for i in range(args.seeds):
        ops = make_differential_ops(f"{args.seed}/{i}", args.ops)
        for kind in ("fm", "baseline"):
            verdict = differential_check(ops, tree_kind=kind)
            if verdict.passed:
                print(f"ok {kind} seed={args.seed}/{i} ops={len(ops)}")
            else:
                failures += 1
                print(f"DIVERGED {kind} seed={args.seed}/{i} "
                      f"at op {verdict.first_divergence}")
    if failures:
        print(f"fmbench: {failures} diverging sequence(s)", file=sys.stderr)
        return 1
    print(f"all {args.seeds * 2} checks passed")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
