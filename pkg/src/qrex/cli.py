"""Command-line entry point.

Subcommands mirror the scenarios: gap, sweep, mixing, verify, theta,
classical.  Exit codes: 0 success, 1 invariant failure, 2 config error,
3 resource guard.
"""

import argparse
import sys

from .harness import (
    DEFAULT_CONFIG,
    ConfigError,
    ResourceGuardError,
    SCENARIOS,
    emit,
    parse_config,
    run_scenario,
    validate_config,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qrex",
        description="Quantum replica-exchange Gibbs samplers: gaps, mixing times, "
                    "and slow-mixing diagnostics by exact diagonalization.",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output file path (default: stdout)")
        p.add_argument("--format", default=None, choices=["csv", "json"],
                       help="output format (default: config value)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--max-dim", type=int, default=None,
                       help="superoperator dimension guard (default 4096)")
        p.add_argument("--parallel", type=int, default=1,
                       help="worker processes for sweep points")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            config = parse_config(args.config)
        else:
            config = validate_config(dict(DEFAULT_CONFIG))
        overrides = config.to_dict()
        overrides["scenario"] = args.scenario
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.max_dim is not None:
            overrides["max_dim"] = args.max_dim
        if args.format is not None:
            overrides["output"] = {**overrides["output"], "format": args.format}
        if args.out is not None:
            overrides["output"] = {**overrides["output"], "path": args.out}
        config = validate_config(overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_scenario(config, parallel=max(1, args.parallel))
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    text = emit(report, config.output["format"], config.output["path"])
    if config.output["path"] is None:
        sys.stdout.write(text)
    if args.scenario == "verify":
        for rec in report.records:
            status = "PASS" if rec["passed"] else "FAIL"
            print(f"[{status}] {rec['check']}: {rec['detail']}", file=sys.stderr)
        if not report.summary.get("passed", False):
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
