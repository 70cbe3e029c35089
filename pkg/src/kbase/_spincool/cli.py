"""
Command implementations for the spin cooling CLI. Each command returns a process exit code.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable

from kbase._spincool import algorithms
from kbase._spincool import logfields
from kbase._spincool import report
from kbase._spincool.algorithms import RunResult
from kbase._spincool.config import OutputFormat, RunConfig
from kbase._spincool.error_mapping import EXIT_OK, map_error
from kbase._spincool.exceptions import InvariantViolationError


SWEEP_SUMMARY = "sweep_summary.csv"
_SWEEP_COLUMNS = [
    "n",
    "eps0",
    "algorithm",
    "backend",
    "converged",
    "steps",
    "target_bias_over_eps0",
    "expected_target_over_eps0",
    "target_relative_residual",
]


def execute(config: RunConfig) -> RunResult:
    """ Run the algorithm a configuration describes. """
    return algorithms.run(
        config.system(),
        config.schedule(),
        backend=config.backend,
        initial=config.initial,
        mode=config.bias_update,
    )


def _check_trace(result: RunResult):
    rep = report.validate_trace(report.trace_to_json(result))
    if rep.problems:
        raise InvariantViolationError(
            f"Trace failed validation: {'; '.join(rep.problems[:5])}")


def _write(config: RunConfig, result: RunResult, out: Path) -> list[Path]:
    return report.write_run(
        result,
        out,
        csv_trace=config.format in (OutputFormat.CSV, OutputFormat.BOTH),
        json_trace=config.format in (OutputFormat.JSON, OutputFormat.BOTH),
        config=config.as_dict(),
    )


def _emit(data: dict[str, Any]):
    sys.stdout.write(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _guarded(command: str, action: Callable[[], None]) -> int:
    logr = logging.getLogger(__name__)
    try:
        action()
        return EXIT_OK
    except Exception as e:
        errmap = map_error(e)
        extra = {logfields.EXIT_CODE: errmap.exit_code}
        if errmap.err_type:
            extra[logfields.ERROR_CODE] = errmap.err_type.error_code
            logr.error(f"{command} failed: {errmap.err_type.error_type}: {e}", extra=extra)
        else:
            logr.error(f"{command} failed: {e}", exc_info=True, extra=extra)
        return errmap.exit_code


def run_simulation(config: RunConfig) -> int:
    """
    Run a simulation, validate its trace and write the trace and summary files to the
    configured output directory, or print the summary if there is none.

    config - the run configuration.

    returns an exit code.
    """
    def action():
        result = execute(config)
        _check_trace(result)
        if config.out:
            paths = _write(config, result, config.out)
            logging.getLogger(__name__).info(
                f"Wrote {len(paths)} files", extra={logfields.OUTPUT_DIR: str(config.out)})
        else:
            _emit(report.summarize(result, config.as_dict()))
    return _guarded("run", action)


def run_compare(
    config_a: RunConfig, config_b: RunConfig, out: Path | None = None, allow_size_mismatch: bool = False
) -> int:
    """
    Run two configurations and compare their final states.

    config_a - the first configuration.
    config_b - the second configuration.
    out - the file to write the comparison JSON to. Printed if None.
    allow_size_mismatch - allow configurations with different numbers of spins.

    returns an exit code.
    """
    def action():
        a = execute(config_a)
        b = execute(config_b)
        cmp = report.compare_runs(a, b, allow_size_mismatch)
        data = report.comparison_to_json(cmp, a, b)
        if out:
            out.parent.mkdir(parents=True, exist_ok=True)
            report.write_json(data, out)
        else:
            _emit(data)
    return _guarded("compare", action)


def _sweep_dir(out: Path, config: RunConfig) -> Path:
    return out / f"n{config.n}_eps0_{config.eps0:g}"


def _sweep_one(config: RunConfig) -> dict[str, Any]:
    result = execute(config)
    _check_trace(result)
    _write(config, result, config.out)
    summary = report.summarize(result)
    return {
        "n": config.n,
        "eps0": config.eps0,
        "algorithm": summary["algorithm"],
        "backend": summary["backend"],
        "converged": summary["converged"],
        "steps": summary["steps"],
        "target_bias_over_eps0": summary["target_bias_over_eps0"],
        "expected_target_over_eps0": summary["expected_target_over_eps0"],
        "target_relative_residual": summary["target_relative_residual"],
    }


def run_sweep(
    config: RunConfig,
    n_values: list[int],
    eps0_values: list[float] | None,
    out: Path,
    jobs: int = 1,
) -> int:
    """
    Run one algorithm over several spin counts and epsilon0 values, one process per run,
    writing a sub-directory per run and a summary CSV.

    config - the base configuration.
    n_values - the spin counts.
    eps0_values - the epsilon0 values. The base configuration's value if None.
    out - the output directory.
    jobs - the number of worker processes.

    returns an exit code.
    """
    def action():
        configs = []
        for n in n_values:
            for eps0 in eps0_values or [config.eps0]:
                c = config.with_system(n, eps0)
                configs.append(c.with_output(_sweep_dir(out, c)))
        logging.getLogger(__name__).info(f"Sweeping {len(configs)} runs with {jobs} workers")
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                rows = list(ex.map(_sweep_one, configs))
        else:
            rows = [_sweep_one(c) for c in configs]
        out.mkdir(parents=True, exist_ok=True)
        with open(out / SWEEP_SUMMARY, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=_SWEEP_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return _guarded("sweep", action)


def run_validate(trace_path: Path) -> int:
    """
    Validate a JSON trace file against the state invariants.

    trace_path - the path to the trace.

    returns an exit code.
    """
    def action():
        if not trace_path.exists():
            raise FileNotFoundError(f"Trace file not found: {trace_path}")
        rep = report.validate_trace(report.load_trace(trace_path))
        if rep.problems:
            raise InvariantViolationError(
                f"{len(rep.problems)} problems in {rep.records} records: "
                + "; ".join(rep.problems[:5]))
        logging.getLogger(__name__).info(f"Validated {rep.records} records in {trace_path}")
    return _guarded("validate", action)
