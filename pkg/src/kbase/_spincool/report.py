"""
Trace and summary files, trace validation and run comparison.

JSON files are written with sorted keys and no timestamps so identical runs produce identical
files. Exact rationals are written as "p/q" strings.
"""

import csv
from fractions import Fraction
import json
import math
from numbers import Real
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from kbase._spincool import analysis
from kbase._spincool.algorithms import RunResult
from kbase._spincool.backends import Backend, SANDS_MAX_SPINS
from kbase._spincool.core import (
    Algorithm,
    SandSDiagonal,
    from_sands,
    product_state,
    sands_biases,
    to_sands,
)
from kbase._spincool.exceptions import InvariantViolationError, MismatchedSystemsError
from kbase._spincool.version import VERSION


TRACE_CSV = "trace.csv"
TRACE_JSON = "trace.json"
SUMMARY_JSON = "summary.json"

_BIAS_TOL = 1e-12
_BIAS_REL_TOL = 1e-9
_PROB_TOL = 1e-12

_FIB_FAMILY = {
    Algorithm.FERNANDEZ: 2,
    Algorithm.FIBONACCI: 2,
    Algorithm.TRIBONACCI: 3,
}


def _value(v: Real) -> float | str:
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def _parse(v: float | str) -> Real:
    return Fraction(v) if isinstance(v, str) else v


def _sig6(v: Real) -> str:
    return f"{float(v):.6g}"


def trace_rows(result: RunResult) -> list[list[str]]:
    """ The trace as CSV rows, biases in units of epsilon0, header first. """
    n = result.system.n
    rows = [["step_index", "label"] + [f"bias_{i}" for i in range(n)]]
    for rec in result.records:
        units = rec.bias_config.in_units(result.epsilon0)
        rows.append([str(rec.step_index), rec.label] + [_sig6(u) for u in units])
    return rows


def trace_to_json(result: RunResult) -> dict[str, Any]:
    """ The trace as a JSON compatible dict with full precision values. """
    records = []
    for rec in result.records:
        entry = {
            "step_index": rec.step_index,
            "label": rec.label,
            "biases": [_value(b) for b in rec.bias_config.biases],
            "biases_over_eps0": [_value(u) for u in rec.bias_config.in_units(result.epsilon0)],
            "max_prob": rec.max_prob,
            "product_state": rec.product_state,
        }
        if rec.sands is not None and result.system.n <= SANDS_MAX_SPINS:
            entry["sands"] = [_value(v) for v in rec.sands.values]
        records.append(entry)
    summary = {
        "algorithm": result.algorithm.value,
        "backend": result.backend.value,
        "n": result.system.n,
        "reset_spins": sorted(result.system.reset_spins),
        "epsilon0": _value(result.epsilon0),
        "target_spin": result.target_spin,
        "converged": result.converged,
        "steps": result.steps,
        "records": records,
    }


def _k(result: RunResult) -> int | None:
    alg = result.algorithm
    if alg in _FIB_FAMILY:
        return _FIB_FAMILY[alg]
    if alg == Algorithm.KBONACCI:
        return result.schedule.k
    if alg in (Algorithm.ALLBONACCI, Algorithm.PPA):
        return result.system.n - 1
    return None


def summarize(result: RunResult, config: dict[str, Any] | None = None) -> dict[str, Any]:
    """
    Summarize a run: the final biases in units of epsilon0, the target bias against its
    expected limit, the fixed point residuals and the bound checks.

    result - the run.
    config - the run configuration as plain values, included as is when supplied.
    """
    system = result.system
    n = system.n
    units = [float(u) for u in result.final_units()]
    target = units[result.target_spin]
    k = _k(result)
    expected = None
    if k is not None or result.algorithm in (Algorithm.PAC1, Algorithm.PAC2, Algorithm.BCS):
        expected = analysis.expected_target_units(
            result.algorithm, n, k=k, L=result.schedule.L)
        if math.isnan(expected):
            expected = None
    bound = analysis.probability_bound(n, system.epsilon, strict=True)
    peak = max(rec.max_prob for rec in result.records)
    shannon = analysis.shannon_bound(n, 1)
    return {
        "algorithm": result.algorithm.value,
        "backend": result.backend.value,
        "n": n,
        "k": result.schedule.k,
        "L": result.schedule.L,
        "epsilon0": _value(result.epsilon0),
        "epsilon": system.epsilon,
        "mode": result.schedule.mode.value,
        "converged": result.converged,
        "steps": result.steps,
        "level_reps": {str(lvl): m for lvl, m in sorted(result.level_reps.items())},
        "target_spin": result.target_spin,
        "final_bias_over_eps0": units,
        "target_bias_over_eps0": target,
        "expected_target_over_eps0": expected,
        "target_relative_residual": abs(target - expected) / expected if expected else None,
        "fixed_point_residuals": (
            analysis.fixed_point_residuals(units, k) if k is not None and n >= 3 else None),
        "shannon_bound_over_eps0": shannon,
        "exceeds_shannon_bound": target > shannon,
        "probability_bound": bound.bound,
        "claimed_probability_bound": bound.claimed,
        "max_prob_peak": peak,
        "within_probability_bound": peak <= bound.bound + _PROB_TOL,
        "version": VERSION,
    }
    if config is not None:
        summary["config"] = config
    return summary


def write_json(data: dict[str, Any], path: Path):
    """ Write JSON with sorted keys and a trailing newline. """
    with open(path, "w") as f:
        f.write(json.dumps(data, sort_keys=True, indent=2) + "\n")


def write_trace_csv(result: RunResult, path: Path):
    """ Write the trace as CSV. """
    with open(path, "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(trace_rows(result))


def write_run(
    result: RunResult,
    out_dir: Path,
    csv_trace: bool = True,
    json_trace: bool = True,
    config: dict[str, Any] | None = None,
) -> list[Path]:
    """
    Write the trace files and the summary for a run.

    result - the run.
    out_dir - the directory to write to. Created if missing.
    csv_trace - write the CSV trace.
    json_trace - write the JSON trace.
    config - the run configuration as plain values for the summary.

    Returns the written paths.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if csv_trace:
        write_trace_csv(result, out_dir / TRACE_CSV)
        written.append(out_dir / TRACE_CSV)
    if json_trace:
        write_json(trace_to_json(result), out_dir / TRACE_JSON)
        written.append(out_dir / TRACE_JSON)
    write_json(summarize(result, config), out_dir / SUMMARY_JSON)
    written.append(out_dir / SUMMARY_JSON)
    return written


class ValidationReport(NamedTuple):
    """ The result of validating a trace file. """

    records: int
    """ The number of records checked. """

    problems: list[str]
    """ The invariant breaches found. Empty if the trace is valid. """


def validate_trace(data: dict[str, Any]) -> ValidationReport:
    """
    Check every record of a parsed JSON trace: biases in [-1, 1], max_prob at most 1, and
    where the S&S diagonal is present, probabilities that are non-negative and sum to 1 and
    marginals that match the recorded biases.

    data - the parsed trace JSON.
    """
    problems = []
    eps0 = _parse(data["epsilon0"])
    for rec in data["records"]:
        step = rec["step_index"]
        biases = [_parse(b) for b in rec["biases"]]
        if any(not -1 <= b <= 1 for b in biases):
            problems.append(f"step {step}: bias outside [-1, 1]")
        if rec["max_prob"] > 1 + _PROB_TOL:
            problems.append(f"step {step}: max_prob {rec['max_prob']} exceeds 1")
        if "sands" not in rec:
            continue
        values = [_parse(v) for v in rec["sands"]]
        exact = any(isinstance(v, Fraction) for v in values)
        diag = SandSDiagonal(np.array(values, dtype=object if exact else np.float64))
        try:
            from_sands(diag, eps0)
        except InvariantViolationError as e:
            problems.append(f"step {step}: {e}")
            continue
        for i, (u, b) in enumerate(zip(sands_biases(diag), biases, strict=True)):
            if not math.isclose(u * eps0, b, rel_tol=_BIAS_REL_TOL, abs_tol=_BIAS_TOL):
                problems.append(f"step {step}: marginal of spin {i} does not match its bias")
    return ValidationReport(records=len(data["records"]), problems=problems)


def load_trace(path: Path) -> dict[str, Any]:
    """ Read a JSON trace file. """
    with open(path) as f:
        return json.load(f)


def final_sands(result: RunResult) -> SandSDiagonal | None:
    """
    The final S&S diagonal of a run. For the bias backend this is the diagonal of the product
    state of the final biases. None if the system is too large.
    """
    final = result.final
    if final.sands is not None:
        return final.sands
    if result.backend == Backend.BIAS and result.system.n <= SANDS_MAX_SPINS:
        return to_sands(product_state(list(final.bias_config.biases)), result.epsilon0)
    return None


class Comparison(NamedTuple):
    """ A comparison of two runs. """

    spin_ratios: list[float]
    """ Per spin final bias of the first run over the second, over the spins both have. """

    target_ratio: float
    """ The first run's target bias over the second's. """

    max_sands_discrepancy: float | None
    """ The largest S&S entry difference, None if unavailable or the sizes differ. """


def _ratio(a: Real, b: Real) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return float(a / b)


def compare_runs(a: RunResult, b: RunResult, allow_size_mismatch: bool = False) -> Comparison:
    """
    Compare the final states of two runs.

    a - the first run.
    b - the second run.
    allow_size_mismatch - allow runs on different numbers of spins. Per spin ratios then
        cover the lower spins both runs have.
    """
    if not math.isclose(a.system.epsilon0, b.system.epsilon0, rel_tol=1e-15):
        raise MismatchedSystemsError(
            f"Runs use different epsilon0: {a.system.epsilon0} and {b.system.epsilon0}")
    if a.system.n != b.system.n and not allow_size_mismatch:
        raise MismatchedSystemsError(
            f"Runs use different numbers of spins: {a.system.n} and {b.system.n}")
    ua, ub = a.final_units(), b.final_units()
    ratios = [_ratio(x, y) for x, y in zip(ua, ub)]
    discrepancy = None
    if a.system.n == b.system.n:
        sa, sb = final_sands(a), final_sands(b)
        if sa is not None and sb is not None:
            discrepancy = float(max(abs(float(x) - float(y)) for x, y in zip(sa.values, sb.values)))
    return Comparison(
        spin_ratios=ratios,
        target_ratio=_ratio(a.target_units(), b.target_units()),
        max_sands_discrepancy=discrepancy,
    )


def comparison_to_json(cmp: Comparison, a: RunResult, b: RunResult) -> dict[str, Any]:
    """ A comparison as a JSON compatible dict. """
    return {
        "a": {"algorithm": a.algorithm.value, "backend": a.backend.value, "n": a.system.n},
        "b": {"algorithm": b.algorithm.value, "backend": b.backend.value, "n": b.system.n},
        "spin_ratios": cmp.spin_ratios,
        "target_ratio": cmp.target_ratio,
        "max_sands_discrepancy": cmp.max_sands_discrepancy,
        "version": VERSION,
    }
