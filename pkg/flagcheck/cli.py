"""CLI interface for flagcheck."""

import argparse
import json
import sys
import time
from typing import Callable

from .checks import FLAG_ADDITIVE_IMPLIES
from .config import RunConfig, apply_settings, load_run_config, thread_count
from .errors import ArgumentError, FlagCheckError
from .formats import _atomic_write
from .measures import get_measure
from .report import Report, render, render_markdown_summary, write_report
from .runner import SweepRunner, is_unexpected

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNEXPECTED = 2

# argparse dest -> config file key
_FLAG_KEYS = {
    "measure": "measure",
    "property": "property",
    "dim": "dim",
    "trials": "trials",
    "seed": "seed",
    "tol": "tol",
    "budget": "budget",
    "nmax": "nmax",
    "out": "out",
    "format": "format",
    "p1": "p1",
    "delta_typ": "delta_typ",
    "kraus_max": "kraus_max",
    "ensemble_max": "ensemble_max",
    "witness": "witness",
    "state": "state",
}


def cmd_check(config: RunConfig, on_progress: Callable[[dict], None] | None = None, threads: int | None = None) -> Report:
    """
    Run the configured property sweep, or replay a stored witness.

    Raises:
        ArgumentError: On an invalid configuration
        CapacityError: If an instance exceeds the dimension cap
    """
    runner = SweepRunner(config, on_progress=on_progress, threads=threads)
    start = time.perf_counter()
    if config.witness_path:
        results = [runner.replay_witness(config.witness_path)]
    else:
        config.validate()
        results = runner.check()
    return Report(config.echo(), results, wall_ms=_wall_ms(config, start))


def cmd_search(config: RunConfig, on_progress: Callable[[dict], None] | None = None, threads: int | None = None) -> Report:
    """
    Search for a violation of one property by one measure.

    Raises:
        ArgumentError: Unless exactly one measure and one property are configured
    """
    config.validate()
    if len(config.measures) != 1 or len(config.properties) != 1:
        raise ArgumentError("search needs exactly one measure and one property")
    runner = SweepRunner(config, on_progress=on_progress, threads=threads)
    start = time.perf_counter()
    outcome = runner.search()
    if config.witness_path:
        _atomic_write(config.witness_path, json.dumps(outcome, indent=2, sort_keys=True) + "\n")
    return Report(config.echo(), [], wall_ms=_wall_ms(config, start), search=outcome)


def cmd_regularize(config: RunConfig, on_progress: Callable[[dict], None] | None = None, threads: int | None = None) -> Report:
    """
    Per-copy regularization tables, with sandwich checks when `sandwich` is set.

    Raises:
        CapacityError: If d^nmax exceeds the dimension cap
    """
    config.validate()
    runner = SweepRunner(config, on_progress=on_progress, threads=threads)
    start = time.perf_counter()
    tables, sandwiches = runner.regularize()
    return Report(config.echo(), sandwiches, wall_ms=_wall_ms(config, start), regularization=tables)


COMMANDS = {"check": cmd_check, "search": cmd_search, "regularize": cmd_regularize}


def _wall_ms(config: RunConfig, start: float) -> int:
    if not config.record_timing:
        return 0
    return int((time.perf_counter() - start) * 1000)


def has_unexpected(report: Report) -> bool:
    """True if the report holds a violation that flag additivity rules out."""
    if any(is_unexpected(r) for r in report.results):
        return True
    s = report.search
    if s is None or s.get("verdict") != "violated":
        return False
    return get_measure(s["measure_id"]).known_flag_additive and s["property"] in FLAG_ADDITIVE_IMPLIES


def build_config(args) -> RunConfig:
    """
    RunConfig from an optional config file overlaid with explicit flags.

    Raises:
        FormatError: On a malformed config file or flag value
        FileNotFoundError: If the config file does not exist
    """
    config = RunConfig(command=args.command)
    if args.config:
        config = load_run_config(args.config, config)
        config.command = args.command
    settings = {key: getattr(args, dest) for dest, key in _FLAG_KEYS.items() if getattr(args, dest, None) is not None}
    apply_settings(config, settings)
    if args.sandwich:
        config.sandwich = True
    if args.timing:
        config.record_timing = True
    return config


def _run(args) -> int:
    """Handle any subcommand: build the config, run it, emit the report."""
    try:
        config = build_config(args)
    except (FlagCheckError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    on_progress = None
    if args.progress:
        from .progress import ProgressRenderer

        on_progress = ProgressRenderer()

    threads = args.threads if args.threads is not None else thread_count()
    try:
        report = COMMANDS[args.command](config, on_progress, threads)
    except (FlagCheckError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if config.output_path:
        write_report(report, config.output_path, config.format)
        print(f"Report written to: {config.output_path}", file=sys.stderr)
    else:
        sys.stdout.write(render(report, config.format))
    if not args.quiet:
        print(render_markdown_summary(report), file=sys.stderr)

    if has_unexpected(report):
        print("Error: unexpected violations by flag-additive measures", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"Error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--measure", help="Measure id(s), comma separated (c_l1, c_rel_ent, c_tr, negativity, eof_2q)")
    parser.add_argument("--property", help="Property name(s), comma separated")
    parser.add_argument("--dim", help="Local dimension(s), comma separated (default: 2)")
    parser.add_argument("--trials", help="Instances per (measure, property, dim) cell (default: 100)")
    parser.add_argument("--seed", help="Master seed (default: 0)")
    parser.add_argument("--tol", help="Tolerance: a number, or id:tol pairs (e.g. c_tr:1e-6,c_l1:1e-9)")
    parser.add_argument("--budget", help="Objective evaluations for search (default: 10000)")
    parser.add_argument("--nmax", help="Largest copy count N (default: 4)")
    parser.add_argument("-o", "--out", help="Report file (default: stdout)")
    parser.add_argument("--format", help="Report format: json or csv (default: json)")
    parser.add_argument("--p1", help="Smaller branch weight of the two-flag state (default: 0.3)")
    parser.add_argument("--delta-typ", dest="delta_typ", help="Typicality width (default: 0.3)")
    parser.add_argument("--kraus-max", dest="kraus_max", help="Max Kraus operators per random channel (default: 6)")
    parser.add_argument("--ensemble-max", dest="ensemble_max", help="Max ensemble size (default: 4)")
    parser.add_argument("--config", help="Flat key = value config file; flags override it")
    parser.add_argument("--threads", type=int, help="Worker threads (default: FLAGCHECK_THREADS or 1)")
    parser.add_argument("--progress", action="store_true", help="Show progress on stderr")
    parser.add_argument("--timing", action="store_true", help="Record wall time in the report")
    parser.add_argument("-q", "--quiet", action="store_true", help="Skip the markdown summary on stderr")
    parser.set_defaults(func=_run, sandwich=False, witness=None, state=None)


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser with all subcommands."""
    parser = _Parser(
        prog="flagcheck",
        description="Property checks and counterexample search for quantum resource measures",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands", parser_class=_Parser)

    # --- check command ---
    check_parser = subparsers.add_parser("check", help="Sweep random instances through property checks")
    _add_common(check_parser)
    check_parser.add_argument("--witness", help="Replay a witness file written by search")

    # --- search command ---
    search_parser = subparsers.add_parser("search", help="Search for a property violation")
    _add_common(search_parser)
    search_parser.add_argument("--witness", help="Also write the best instance to this file")

    # --- regularize command ---
    reg_parser = subparsers.add_parser("regularize", help="Per-copy values M(ρ^⊗N)/N")
    _add_common(reg_parser)
    reg_parser.add_argument("--state", help="QSTATE file to use instead of random states")
    reg_parser.add_argument("--sandwich", action="store_true", help="Also check the typical-part sandwich")

    return parser


def main(args: list[str] | None = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        args: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code (0=success, 1=usage or configuration error, 2=unexpected violations)
    """
    parser = create_parser()
    parsed = parser.parse_args(args)

    if parsed.command is None:
        parser.print_help()
        return EXIT_OK

    return parsed.func(parsed)


if __name__ == "__main__":
    sys.exit(main())
