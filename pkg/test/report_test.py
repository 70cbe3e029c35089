import csv
import json
import math

import pytest

from kbase._spincool import algorithms as alg
from kbase._spincool import report
from kbase._spincool.core import Algorithm, Schedule, SpinSystem
from kbase._spincool.exceptions import MismatchedSystemsError
from kbase._spincool.version import VERSION


def _system(n, reset=(0, 1), eps0=1e-6):
    return SpinSystem.create(n, reset, epsilon0=eps0)


def _fernandez(m=1, backend="bias", eps0=1e-6):
    return alg.fernandez(
        _system(3, eps0=eps0), Schedule(algorithm=Algorithm.FERNANDEZ, reps=(m,)), backend=backend)


def _ppa(steps=6):
    return alg.ppa(
        _system(3, reset=(0,)), Schedule(algorithm=Algorithm.PPA, max_steps=steps), backend="rational")


def test_trace_rows():
    rows = report.trace_rows(_fernandez())
    assert rows == [
        ["step_index", "label", "bias_0", "bias_1", "bias_2"],
        ["0", "INIT", "1", "1", "0"],
        ["1", "3B-Comp", "0", "0", "1"],
        ["2", "RESET", "1", "1", "1"],
    ]


def test_trace_to_json_rational():
    data = report.trace_to_json(_ppa(2))
    assert data["algorithm"] == "ppa"
    assert data["backend"] == "rational"
    assert data["n"] == 3
    assert data["reset_spins"] == [0]
    assert data["epsilon0"] == "1/1000000"
    assert data["target_spin"] == 2
    assert data["steps"] == 2
    assert not data["converged"]
    last = data["records"][-1]
    assert last["label"] == "SORT"
    assert last["biases"] == ["0", "0", "1/1000000"]
    assert last["biases_over_eps0"] == ["0", "0", "1"]
    assert last["sands"] == ["1", "1", "1", "1", "-1", "-1", "-1", "-1"]
    assert last["product_state"] is True


def test_trace_to_json_bias_backend_has_no_sands():
    data = report.trace_to_json(_fernandez())
    assert data["epsilon0"] == 1e-6
    assert all("sands" not in r for r in data["records"])
    assert data["records"][-1]["biases_over_eps0"] == pytest.approx([1, 1, 1])


def test_summarize_fibonacci():
    res = alg.fibonacci(_system(12), Schedule(algorithm=Algorithm.FIBONACCI))
    s = report.summarize(res)
    assert s["algorithm"] == "fibonacci"
    assert s["backend"] == "bias"
    assert s["n"] == 12
    assert s["mode"] == "exhaustive"
    assert s["converged"]
    assert s["target_spin"] == 11
    assert s["target_bias_over_eps0"] == pytest.approx(144, rel=1e-4)
    assert s["expected_target_over_eps0"] == 144
    assert s["target_relative_residual"] < 1e-4
    assert len(s["fixed_point_residuals"]) == 10
    assert max(s["fixed_point_residuals"]) < 1e-4
    assert s["shannon_bound_over_eps0"] == pytest.approx(math.sqrt(12))
    assert s["exceeds_shannon_bound"]
    assert s["within_probability_bound"]
    assert s["max_prob_peak"] <= s["probability_bound"]
    assert s["claimed_probability_bound"] <= s["probability_bound"]
    assert s["version"] == VERSION
    assert set(s["level_reps"]) == {str(j) for j in range(3, 13)}


def test_summarize_expected_targets():
    s = report.summarize(alg.pac2(_system(5, reset=(0,)), Schedule(algorithm=Algorithm.PAC2, L=2)))
    assert s["expected_target_over_eps0"] == 2.25
    assert s["target_relative_residual"] == pytest.approx(0, abs=1e-12)
    assert s["L"] == 2
    s = report.summarize(
        alg.bcs(_system(4, eps0=1e-4), Schedule(algorithm=Algorithm.BCS, reps=(1,))))
    assert s["expected_target_over_eps0"] is None
    assert s["target_relative_residual"] is None
    assert s["fixed_point_residuals"] is None
    s = report.summarize(_ppa(13))
    assert s["expected_target_over_eps0"] == 2
    assert s["epsilon0"] == "1/1000000"
    assert s["final_bias_over_eps0"] == [1, 1, 1.75]


def test_write_run(tmp_path):
    res = _ppa(13)
    paths = report.write_run(res, tmp_path / "out")
    assert [p.name for p in paths] == ["trace.csv", "trace.json", "summary.json"]
    with open(tmp_path / "out" / "trace.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert len(rows) == 15
    assert rows[-1] == ["13", "RESET", "1", "1", "1.75"]
    trace = report.load_trace(tmp_path / "out" / "trace.json")
    assert len(trace["records"]) == 14
    with open(tmp_path / "out" / "summary.json") as f:
        assert json.load(f)["steps"] == 13


def test_write_run_includes_config(tmp_path):
    report.write_run(_ppa(13), tmp_path, config={"alg": "ppa", "n": 3})
    with open(tmp_path / "summary.json") as f:
        assert json.load(f)["config"] == {"alg": "ppa", "n": 3}
    assert "config" not in report.summarize(_ppa(13))


def test_write_run_is_deterministic(tmp_path):
    report.write_run(_ppa(13), tmp_path / "a")
    report.write_run(_ppa(13), tmp_path / "b")
    for name in ("trace.csv", "trace.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_write_run_csv_only(tmp_path):
    paths = report.write_run(_fernandez(), tmp_path, json_trace=False)
    assert [p.name for p in paths] == ["trace.csv", "summary.json"]
    assert not (tmp_path / "trace.json").exists()


@pytest.mark.parametrize("make", [
    lambda: _ppa(13),
    lambda: _fernandez(5),
    lambda: _fernandez(5, backend="exact", eps0=1e-3),
    lambda: alg.fibonacci(
        _system(5, eps0=1e-4), Schedule(algorithm=Algorithm.FIBONACCI, reps=(2, 2, 2)),
        backend="exact"),
])
def test_validate_trace_accepts_runs(make):
    data = json.loads(json.dumps(report.trace_to_json(make())))
    rep = report.validate_trace(data)
    assert rep.problems == []
    assert rep.records == len(data["records"])


def test_validate_trace_finds_problems():
    data = json.loads(json.dumps(report.trace_to_json(_ppa(13))))
    data["records"][1]["biases"][0] = 1.5
    data["records"][2]["max_prob"] = 1.2
    data["records"][3]["sands"][0] = "2000000"
    data["records"][4]["biases"][2] = "1/2000000"
    rep = report.validate_trace(data)
    assert rep.records == 14
    assert rep.problems[0] == "step 1: bias outside [-1, 1]"
    assert "step 1: marginal of spin 0 does not match its bias" in rep.problems
    assert "step 2: max_prob 1.2 exceeds 1" in rep.problems
    assert any(p.startswith("step 3: ") and "sum to" in p for p in rep.problems)
    assert "step 4: marginal of spin 2 does not match its bias" in rep.problems
    assert len(rep.problems) == 5


def test_final_sands():
    bias = _fernandez(2)
    sands = report.final_sands(bias)
    assert sands.n == 3
    assert float(sands.values[0]) == pytest.approx(1 + 1 + 1.5, rel=1e-5)
    assert report.final_sands(_ppa(13)) == _ppa(13).final.sands
    big = alg.fibonacci(_system(13), Schedule(algorithm=Algorithm.FIBONACCI, reps=(1,) * 11))
    assert report.final_sands(big) is None


def test_compare_runs_across_backends():
    a = _fernandez(3, eps0=1e-4)
    b = _fernandez(3, backend="exact", eps0=1e-4)
    cmp = report.compare_runs(a, b)
    assert cmp.spin_ratios == pytest.approx([1, 1, 1], rel=1e-3)
    assert cmp.target_ratio == pytest.approx(1, rel=1e-3)
    assert cmp.max_sands_discrepancy < 0.05
    data = report.comparison_to_json(cmp, a, b)
    assert data["a"] == {"algorithm": "fernandez", "backend": "bias", "n": 3}
    assert data["b"] == {"algorithm": "fernandez", "backend": "exact", "n": 3}
    assert data["target_ratio"] == cmp.target_ratio
    assert data["version"] == VERSION


def test_compare_runs_of_different_sizes():
    fib = alg.fibonacci(_system(12), Schedule(algorithm=Algorithm.FIBONACCI))
    pac = alg.pac2(_system(13, reset=(0,)), Schedule(algorithm=Algorithm.PAC2, L=6))
    with pytest.raises(MismatchedSystemsError, match="different numbers of spins: 12 and 13"):
        report.compare_runs(fib, pac)
    cmp = report.compare_runs(fib, pac, allow_size_mismatch=True)
    assert cmp.target_ratio == pytest.approx(144 / 1.5 ** 6, rel=1e-4)
    assert len(cmp.spin_ratios) == 12
    assert cmp.max_sands_discrepancy is None


def test_compare_runs_zero_biases_and_epsilon_mismatch():
    cmp = report.compare_runs(_fernandez(0), _fernandez(0))
    assert cmp.spin_ratios == [1.0, 1.0, 1.0]
    assert cmp.target_ratio == 1.0
    assert cmp.max_sands_discrepancy == 0
    with pytest.raises(MismatchedSystemsError, match="different epsilon0"):
        report.compare_runs(_fernandez(1), _fernandez(1, eps0=1e-5))
