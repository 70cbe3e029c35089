#!/usr/bin/env python

"""
The entry point for the heat-bath algorithmic cooling simulator CLI.

Subcommands:
    run - run one algorithm and write its trace and summary.
    compare - run two configurations and compare their final states.
    sweep - run one algorithm over several spin counts and epsilon0 values.
    validate - check a JSON trace file against the state invariants.
"""

import argparse
import datetime
import logging
from pathlib import Path
import sys

from pythonjsonlogger.core import RESERVED_ATTRS
from pythonjsonlogger.json import JsonFormatter

from kbase._spincool import cli
from kbase._spincool.backends import Backend, InitialState
from kbase._spincool.config import OutputFormat, RunConfig, load_config
from kbase._spincool.core import Algorithm, Mode
from kbase._spincool.error_mapping import EXIT_CONFIG
from kbase._spincool.exceptions import ConfigError
from kbase._spincool.leading_order import UpdateMode
from kbase._spincool import logfields
from kbase._spincool.version import VERSION


PROGRAM_NAME = "spincool"


###
# Logging setup
###


class CustomJsonFormatter(JsonFormatter):
    """ Remove keys with null values from the logs. """

    def process_log_record(self, log_record):
        return super().process_log_record(
            {k: v for k, v in log_record.items() if v is not None}
        )


def setup_logging(level: int = logging.INFO):
    """
    Send JSON logs to stderr. Results go to files or stdout, never to the logs.
    """
    # https://stackoverflow.com/a/58777937/643675
    logging.Formatter.formatTime = (
        lambda self, record, datefmt=None: datetime.datetime.fromtimestamp(
            record.created, datetime.timezone.utc
        ).astimezone().isoformat(sep="T", timespec="milliseconds"))
    rootlogger = logging.getLogger()
    # The list slice prevents list modification while iterating
    for handler in rootlogger.handlers[:]:
        rootlogger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(CustomJsonFormatter(
        "{levelname}{name}{message}{asctime}{exc_info}",
        style="{",
        rename_fields={"levelname": "level"},
        reserved_attrs=RESERVED_ATTRS,
    ))
    rootlogger.addHandler(handler)
    rootlogger.setLevel(logging.WARNING)
    logging.getLogger("kbase").setLevel(level)


###
# Argument parsing
###


def _choices(enum_type) -> list[str]:
    return [e.value for e in enum_type]


def _int_list(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v.strip()]


def _float_list(value: str) -> list[float]:
    return [float(v) for v in value.split(",") if v.strip()]


def _add_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="A TOML run configuration file")
    parser.add_argument("--alg", choices=_choices(Algorithm), help="The algorithm to run")
    parser.add_argument("--n", type=int, help="The number of spins")
    parser.add_argument("--k", type=int, help="The k-bonacci parameter")
    parser.add_argument("--L", type=int, help="The number of PAC levels")
    parser.add_argument("--eps0", type=float, help="The equilibrium bias")
    parser.add_argument("--eps", type=float, help="The inverse temperature parameter")
    parser.add_argument("--backend", choices=_choices(Backend), help="The simulation backend")
    parser.add_argument("--mode", choices=_choices(Mode), help="How recursion levels terminate")
    parser.add_argument("--reps", help="Comma separated repetition counts m_n,...,m_3")
    parser.add_argument("--delta", type=float, help="The convergence tolerance in epsilon0")
    parser.add_argument(
        "--max-steps", "--steps", dest="max_steps", type=int, help="The elementary step cap")
    parser.add_argument("--format", choices=_choices(OutputFormat), help="Trace file format")
    parser.add_argument(
        "--initial", choices=_choices(InitialState), help="The starting state")
    parser.add_argument(
        "--trace-depth", dest="trace_depth", type=int,
        help="The deepest recursion level whose steps are recorded")
    parser.add_argument(
        "--bias-update", dest="bias_update", choices=_choices(UpdateMode),
        help="The bias update form on the bias backend")
    parser.add_argument(
        "--no-memoize", dest="memoize", action="store_const", const=False,
        help="Iterate every exhaustive sub-level literally")


_RUN_KEYS = [
    "alg", "n", "k", "L", "eps0", "eps", "backend", "mode", "reps", "delta", "max_steps",
    "format", "initial", "trace_depth", "bias_update", "memoize",
]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROGRAM_NAME, description="Heat-bath algorithmic cooling simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one algorithm")
    _add_run_flags(run)
    run.add_argument("--out", type=Path, help="The output directory")

    compare = sub.add_parser("compare", help="Compare two runs")
    compare.add_argument("config_a", type=Path, help="The first TOML run configuration")
    compare.add_argument("config_b", type=Path, help="The second TOML run configuration")
    compare.add_argument("--eps0", type=float, help="Override epsilon0 for both runs")
    compare.add_argument("--out", type=Path, help="The comparison JSON file")
    compare.add_argument(
        "--allow-n-mismatch", action="store_true",
        help="Allow runs on different numbers of spins")

    sweep = sub.add_parser("sweep", help="Run one algorithm over several systems")
    _add_run_flags(sweep)
    sweep.add_argument("--n-values", type=_int_list, required=True, help="Comma separated n")
    sweep.add_argument("--eps0-values", type=_float_list, help="Comma separated epsilon0")
    sweep.add_argument("--jobs", type=int, default=1, help="The number of worker processes")
    sweep.add_argument("--out", type=Path, required=True, help="The output directory")

    validate = sub.add_parser("validate", help="Validate a JSON trace file")
    validate.add_argument("trace", type=Path, help="The trace file")
    return parser


def _run_config(args: argparse.Namespace, **extra) -> RunConfig:
    file_values = load_config(args.config) if args.config else None
    flags = {k: getattr(args, k) for k in _RUN_KEYS}
    return RunConfig.build(file_values, **(flags | extra))


def main(argv: list[str] | None = None) -> int:
    """
    Run the CLI.

    argv - the arguments, sys.argv[1:] if None.

    returns an exit code.
    """
    args = _build_parser().parse_args(argv)
    setup_logging(logging.WARNING if args.quiet else logging.INFO)
    logr = logging.getLogger(__name__)
    logr.info(f"{PROGRAM_NAME} {args.command}", extra={logfields.VERSION: VERSION})
    try:
        match args.command:
            case "run":
                return cli.run_simulation(_run_config(args, out=args.out))
            case "compare":
                return cli.run_compare(
                    RunConfig.build(load_config(args.config_a), eps0=args.eps0),
                    RunConfig.build(load_config(args.config_b), eps0=args.eps0),
                    args.out,
                    args.allow_n_mismatch,
                )
            case "sweep":
                base_n = {"n": args.n_values[0]} if args.n is None else {}
                return cli.run_sweep(
                    _run_config(args, **base_n), args.n_values, args.eps0_values, args.out, args.jobs)
            case "validate":
                return cli.run_validate(args.trace)
    except ConfigError as e:
        logr.error(f"Invalid configuration: {e}", extra={logfields.EXIT_CODE: EXIT_CONFIG})
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
