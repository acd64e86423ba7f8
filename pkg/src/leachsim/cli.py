"""Command-line front end.

Subcommands:
  run      one (protocol, seed) simulation; writes report.json/report.csv
           and the event trace
  compare  every (protocol, node_count, seed) of a scenario; writes the
           full output tree of CSV series and figures
  verify   compare plus directional trend checks; exits nonzero when a
           claim fails
  replay   rebuild tables and metrics from a saved trace (the oracle path)
           and optionally check them against a saved report

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 verification failure (failed trend claim, trace violation or report
mismatch).
"""

from __future__ import annotations

import argparse
import sys

from .config import PROTOCOLS
from .engine import simulate
from .errors import ConfigError, TraceFormatError
from . import export
from . import replay as replay_mod
from .scenario import parse_config, run_scenario, verify_trends

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VERIFY = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="leachsim",
        description="Deterministic LEACH / FZ-LEACH / OFZ-LEACH simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single simulation")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override the first scenario seed")
    p_run.add_argument("--protocol", choices=PROTOCOLS, default=None,
                       help="override the first scenario protocol")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--no-trace", action="store_true", help="skip writing the event trace")

    p_cmp = sub.add_parser("compare", help="run a full protocol/seed comparison")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--trace", action="store_true", help="also write per-run event traces")
    p_cmp.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_ver = sub.add_parser("verify", help="compare and check the directional trends")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--out", default=None, help="optionally export the comparison as well")
    p_ver.add_argument("--no-plots", action="store_true")

    p_rep = sub.add_parser("replay", help="re-derive tables and metrics from a trace")
    p_rep.add_argument("--trace", required=True, help="trace file written by run/compare")
    p_rep.add_argument("--report", default=None,
                       help="report.json to check the recomputed metrics against")
    return parser


def _cmd_run(args):
    scenario = parse_config(args.config)
    protocol = args.protocol or scenario.protocols[0]
    seed = args.seed if args.seed is not None else scenario.seeds[0]
    config = scenario.config_for(protocol, scenario.node_counts[0], seed)
    result = simulate(config)
    report = result.report
    for name, value in zip(report.scalar_columns(), report.scalar_row()):
        print(f"{name}: {value}")
    if args.out:
        trace_text = None if args.no_trace else result.trace_text()
        written = export.write_single_report(report, args.out, trace_text)
        for path in written:
            print(f"wrote {path}")
    return EXIT_OK


def _print_verdicts(verdicts):
    failed = 0
    for verdict in verdicts:
        print(verdict.describe())
        if not verdict.passed:
            failed += 1
    print(f"{len(verdicts) - failed}/{len(verdicts)} trend claims hold")
    return failed


def _cmd_compare(args):
    scenario = parse_config(args.config)
    comparison = run_scenario(scenario, keep_traces=args.trace)
    written = export.export_results(comparison, args.out, make_plots=not args.no_plots)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify(args):
    scenario = parse_config(args.config)
    comparison = run_scenario(scenario)
    verdicts = verify_trends(comparison)
    if args.out:
        export.export_results(comparison, args.out, verdicts=verdicts,
                              make_plots=not args.no_plots)
    failed = _print_verdicts(verdicts)
    return EXIT_VERIFY if failed else EXIT_OK


def _cmd_replay(args):
    with open(args.trace, "r", encoding="utf-8") as fh:
        text = fh.read()
    meta, records = replay_mod.parse_trace(text)
    problems = replay_mod.check_invariants(meta, records)
    metrics = replay_mod.recompute_metrics(meta, records)
    print(f"trace: {args.trace}")
    print(f"records: {len(records)}")
    for name in sorted(metrics):
        print(f"{name}: {metrics[name]}")
    for problem in problems:
        print(f"violation: {problem}")
    mismatches = []
    if args.report:
        import json

        with open(args.report, "r", encoding="utf-8") as fh:
            report = json.load(fh)
        for name, value in metrics.items():
            if name not in report or value is None:
                continue
            if report[name] != value:
                mismatches.append(f"{name}: report={report[name]} replay={value}")
        for line in mismatches:
            print(f"mismatch: {line}")
        if not mismatches:
            print("report matches replay")
    return EXIT_VERIFY if (problems or mismatches) else EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "verify": _cmd_verify,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
