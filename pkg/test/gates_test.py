from fractions import Fraction

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from kbase._spincool.core import (
    DiagonalState,
    SandSDiagonal,
    linear_sands,
    marginal_bias,
    marginal_biases,
    mixed_state,
    product_state,
    thermal_state,
    to_sands,
)
from kbase._spincool.exceptions import (
    GateOperandError,
    ResetSpinError,
    SpinIndexError,
)
from kbase._spincool import gates
from kbase._spincool.gates import GateKind, GateSpec


def _probs(n: int):
    return st.lists(
        st.floats(min_value=0.01, max_value=1.0), min_size=1 << n, max_size=1 << n
    ).map(lambda w: DiagonalState(np.array(w) / np.sum(w)))


def _entropy(state: DiagonalState) -> float:
    p = state.probs[state.probs > 0]
    return float(-np.sum(p * np.log2(p)))


def test_gate_spec_arity():
    GateSpec(GateKind.CNOT, (0, 1))
    GateSpec(GateKind.SORT)
    GateSpec(GateKind.COMP_EXCHANGE, (3, 2, 1, 0))
    with pytest.raises(GateOperandError, match="cnot takes 2 operands, got 3"):
        GateSpec(GateKind.CNOT, (0, 1, 2))
    with pytest.raises(GateOperandError, match="comp takes at least 3 operands, got 2"):
        GateSpec(GateKind.COMP_EXCHANGE, (1, 0))
    with pytest.raises(GateOperandError, match="bcs takes at least 3 operands"):
        GateSpec(GateKind.BCS_STEP, (0, 1))


def test_gate_spec_distinct_operands():
    with pytest.raises(GateOperandError, match=r"cswap operands must be distinct: \(0, 1, 0\)"):
        GateSpec(GateKind.CSWAP, (0, 1, 0))


def test_gate_spec_range():
    spec = GateSpec(GateKind.SWAP, (0, 3))
    spec.check_range(4)
    with pytest.raises(SpinIndexError):
        spec.check_range(3)
    with pytest.raises(SpinIndexError):
        gates.swap(mixed_state(3), 0, 3)


def test_gate_spec_is_permutation():
    assert GateSpec(GateKind.NOT, (0,)).is_permutation
    assert not GateSpec(GateKind.RESET, (0,)).is_permutation
    assert not GateSpec(GateKind.SORT).is_permutation


def test_permutation_fail_for_reset():
    with pytest.raises(GateOperandError, match="reset is not a permutation gate"):
        gates.permutation(GateSpec(GateKind.RESET, (0,)), 2)


def test_permute():
    out = gates.permute(np.array([10, 20, 30]), np.array([2, 0, 1]))
    np.testing.assert_array_equal(out, [20, 30, 10])


def test_comp_exchange_truth_table():
    # spins (2, 1, 0): 100 is index 4 with spin 2 down, 011 is index 3
    dest = gates.permutation(GateSpec(GateKind.COMP_EXCHANGE, (2, 1, 0)), 3)
    np.testing.assert_array_equal(dest, [0, 1, 2, 4, 3, 5, 6, 7])


def test_comp_exchange_other_spins_untouched():
    # 3 spin exchange on spins (3, 1, 0) of 4, spin 2 is a spectator
    dest = gates.permutation(GateSpec(GateKind.COMP_EXCHANGE, (3, 1, 0)), 4)
    expected = list(range(16))
    for spectator in (0, 4):
        a, b = 0b1000 | spectator, 0b0011 | spectator
        expected[a], expected[b] = b, a
    np.testing.assert_array_equal(dest, expected)


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_comp_exchange_equal_biases(eps):
    after = gates.comp_exchange(thermal_state(3, eps), (2, 1, 0))
    assert marginal_bias(after, 2) == pytest.approx((3 * eps - eps ** 3) / 2, rel=0, abs=1e-14)


def test_comp_exchange_general_biases():
    rng = np.random.default_rng(20070101)
    for eA, eB, eC in rng.uniform(-1, 1, size=(1000, 3)):
        after = gates.comp_exchange(product_state([eA, eB, eC]), (2, 1, 0))
        expected = (eC + eB + eA - eC * eB * eA) / 2
        assert marginal_bias(after, 2) == pytest.approx(expected, rel=0, abs=1e-14)


def test_comp_exchange_symmetric_state_unchanged():
    probs = np.full(8, 0.125)
    probs[[0, 7]] = [0.2, 0.05]
    state = DiagonalState(probs)
    np.testing.assert_array_equal(gates.comp_exchange(state, (2, 1, 0)).probs, state.probs)


def _oracle_exchange_4(biases: list[float]) -> float:
    # biases listed leftmost spin first, the 16 state vector built independently
    probs = {}
    for bits in range(16):
        p = 1.0
        for pos, b in enumerate(biases):
            down = (bits >> (3 - pos)) & 1
            p *= (1 - b) / 2 if down else (1 + b) / 2
        probs[bits] = p
    probs[0b1000], probs[0b0111] = probs[0b0111], probs[0b1000]
    return sum(p if not bits & 0b1000 else -p for bits, p in probs.items())


def test_comp_exchange_four_spins_against_oracle():
    biases = [0.0, 0.01, 0.01, 0.01]
    after = gates.comp_exchange(product_state(list(reversed(biases))), (3, 2, 1, 0))
    assert marginal_bias(after, 3) == pytest.approx(_oracle_exchange_4(biases), abs=1e-15)


def test_comp_exchange_fail():
    with pytest.raises(GateOperandError):
        gates.comp_exchange(mixed_state(3), (2, 1))
    with pytest.raises(GateOperandError):
        gates.comp_exchange(mixed_state(3), (2, 1, 2))


def test_cnot_doubles_bias():
    eps0 = 0.05
    after = gates.cnot(thermal_state(2, eps0), 1, 0)
    # condition on the target reading up: indexes 0 and 2
    p_up = after.probs[0] / (after.probs[0] + after.probs[2])
    expected = (1 + eps0) ** 2 / ((1 + eps0) ** 2 + (1 - eps0) ** 2)
    assert p_up == pytest.approx(expected, rel=1e-14)
    assert 2 * p_up - 1 == pytest.approx(2 * eps0 / (1 + eps0 ** 2), rel=1e-12)


def test_gate_truth_tables():
    assert list(gates.permutation(GateSpec(GateKind.CNOT, (1, 0)), 2)) == [0, 1, 3, 2]
    assert list(gates.permutation(GateSpec(GateKind.NOT, (1,)), 2)) == [2, 3, 0, 1]
    assert list(gates.permutation(GateSpec(GateKind.SWAP, (0, 1)), 2)) == [0, 2, 1, 3]
    # control spin 2 down swaps spins 1 and 0
    assert list(gates.permutation(GateSpec(GateKind.CSWAP, (2, 1, 0)), 3)) == [
        0, 1, 2, 3, 4, 6, 5, 7]


def test_not_gate_involution():
    state = product_state([0.1, -0.3, 0.2])
    twice = gates.not_gate(gates.not_gate(state, 1), 1)
    np.testing.assert_array_equal(twice.probs, state.probs)
    assert marginal_bias(gates.not_gate(state, 1), 1) == pytest.approx(0.3)


def test_swap_moves_bias():
    after = gates.swap(product_state([0.4, 0.0, 0.0]), 0, 2)
    assert marginal_biases(after).biases == pytest.approx((0.0, 0.0, 0.4))


@settings(max_examples=50, deadline=None)
@given(_probs(3), st.sampled_from([
    GateSpec(GateKind.COMP_EXCHANGE, (2, 1, 0)),
    GateSpec(GateKind.COMP_EXCHANGE, (0, 2, 1)),
    GateSpec(GateKind.CNOT, (0, 2)),
    GateSpec(GateKind.NOT, (1,)),
    GateSpec(GateKind.CSWAP, (1, 0, 2)),
    GateSpec(GateKind.SWAP, (2, 0)),
    GateSpec(GateKind.BCS_STEP, (0, 1, 2)),
]))
def test_permutation_gates_preserve_probabilities(state, spec):
    after = gates.apply_gate(state, spec)
    np.testing.assert_array_equal(np.sort(after.probs), np.sort(state.probs))
    assert _entropy(after) == pytest.approx(_entropy(state), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(_probs(4))
def test_comp_exchange_is_its_own_inverse(state):
    twice = gates.comp_exchange(gates.comp_exchange(state, (3, 1, 2, 0)), (3, 1, 2, 0))
    np.testing.assert_array_equal(twice.probs, state.probs)


def test_gate_comp_matches_comp_exchange_on_random_product_states():
    rng = np.random.default_rng(12)
    for biases in rng.uniform(-1, 1, size=(1000, 3)):
        state = product_state(list(biases))
        via_gates = gates.gate_comp(state, 2, 1, 0)
        via_exchange = gates.comp_exchange(state, (2, 1, 0))
        assert marginal_bias(via_gates, 2) == pytest.approx(
            marginal_bias(via_exchange, 2), rel=0, abs=1e-12)


def test_bcs_sequence():
    assert gates.bcs_sequence(0, 1, (2, 3, 4)) == [
        GateSpec(GateKind.CNOT, (1, 0)),
        GateSpec(GateKind.NOT, (0,)),
        GateSpec(GateKind.CSWAP, (0, 1, 2)),
        GateSpec(GateKind.SWAP, (2, 3)),
        GateSpec(GateKind.CSWAP, (0, 3, 4)),
    ]
    with pytest.raises(GateOperandError, match="requires at least one spin"):
        gates.bcs_sequence(0, 1, ())


def _bcs_oracle(n: int, x: int, y: int, chain: list[int]) -> list[int]:
    def bit(i, s):
        return (i >> s) & 1

    def put(i, s, v):
        return (i & ~(1 << s)) | (v << s)

    dest = []
    for idx in range(1 << n):
        i = put(idx, x, bit(idx, x) ^ bit(idx, y))
        i ^= 1 << x
        prev = y
        for pos, t in enumerate(chain):
            if pos % 2 == 1 or bit(i, x):
                a, b = bit(i, prev), bit(i, t)
                i = put(put(i, prev, b), t, a)
            prev = t
        dest.append(i)
    return dest


def test_bcs_step_against_truth_table_oracle():
    rng = np.random.default_rng(4)
    w = rng.uniform(0.1, 1, size=16)
    state = DiagonalState(w / w.sum())
    after = gates.bcs_step(state, 0, 1, (2, 3))
    expected = gates.permute(state.probs, np.array(_bcs_oracle(4, 0, 1, [2, 3])))
    np.testing.assert_array_equal(after.probs, expected)


def test_bcs_step_doubles_pair_bias():
    eps0 = 0.01
    after = gates.bcs_step(thermal_state(3, eps0), 0, 1, (2,))
    # x reads down where x and y agreed, and there spin 2 holds y's doubled bias
    x_down = after.probs[[1, 3, 5, 7]]
    p_up = (x_down[0] + x_down[1]) / x_down.sum()
    assert 2 * p_up - 1 == pytest.approx(2 * eps0 / (1 + eps0 ** 2), rel=1e-12)


def test_bcs_step_zero_bias():
    after = gates.bcs_step(mixed_state(4), 0, 1, (2, 3))
    np.testing.assert_array_equal(after.probs, mixed_state(4).probs)


def test_reset_of_mixed_state():
    eps0 = 1e-3
    after = gates.reset(mixed_state(3), 0, eps0, reset_spins={0})
    np.testing.assert_allclose(
        to_sands(after, eps0).values, [1, -1, 1, -1, 1, -1, 1, -1], rtol=0, atol=1e-9)


def test_reset_exact():
    after = gates.reset(mixed_state(2, exact=True), 1, Fraction(1, 10))
    assert list(after.probs) == [
        Fraction(11, 40), Fraction(11, 40), Fraction(9, 40), Fraction(9, 40)]


def test_reset_restores_unit_total():
    probs = np.full(8, 0.125)
    probs[0] += 5e-13
    after = gates.reset(DiagonalState(probs), 0, 1e-6)
    assert abs(after.probs.sum() - 1) <= 1e-15


def test_reset_and_sort_keep_unit_total_over_long_runs():
    state = product_state([0.3, 0.1, -0.2, 0.05])
    for _ in range(5000):
        state, _ = gates.sort_step(gates.reset(state, 0, 1e-6))
    assert abs(state.probs.sum() - 1) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(_probs(3))
def test_reset_sets_marginal_and_keeps_others(state):
    eps0 = 0.02
    after = gates.reset(state, 0, eps0)
    assert after.probs.sum() == pytest.approx(1, abs=1e-12)
    assert marginal_bias(after, 0) == pytest.approx(eps0, abs=1e-12)
    for s in (1, 2):
        assert marginal_bias(after, s) == pytest.approx(marginal_bias(state, s), abs=1e-12)
    again = gates.reset(after, 0, eps0)
    np.testing.assert_allclose(again.probs, after.probs, rtol=0, atol=1e-15)


def test_reset_fail():
    with pytest.raises(ResetSpinError, match="Spin 2 is not a reset spin"):
        gates.reset(mixed_state(3), 2, 0.1, reset_spins={0, 1})
    with pytest.raises(ResetSpinError):
        gates.reset_sands(SandSDiagonal(np.zeros(8)), 1, reset_spins={0})
    with pytest.raises(SpinIndexError):
        gates.reset(mixed_state(3), 3, 0.1)
    with pytest.raises(GateOperandError, match="reset requires epsilon0"):
        gates.apply_gate(mixed_state(3), GateSpec(GateKind.RESET, (0,)))


def test_reset_sands():
    d = gates.reset_sands(SandSDiagonal(np.array([3, 1, 1, 1, -1, -1, -1, -3])), 0)
    np.testing.assert_array_equal(d.values, [3, 1, 2, 0, 0, -2, -1, -3])


def test_reset_sands_keeps_fractions():
    d = linear_sands([Fraction(0), Fraction(1, 2)])
    after = gates.reset_sands(d, 0)
    assert after.values.dtype == object
    assert list(after.values) == [
        Fraction(3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(-3, 2)]


def test_descending_order_is_stable():
    values, perm = gates.descending_order(np.array([1.0, 3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(values, [3.0, 2.0, 1.0, 1.0])
    np.testing.assert_array_equal(perm, [2, 0, 3, 1])
    exact = np.array([Fraction(1), Fraction(3), Fraction(1), Fraction(2)], dtype=object)
    values, perm = gates.descending_order(exact)
    assert list(values) == [3, 2, 1, 1]
    np.testing.assert_array_equal(perm, [2, 0, 3, 1])


def test_sort_step():
    state = product_state([-0.1, 0.2])
    after, perm = gates.sort_step(state)
    assert list(after.probs) == sorted(state.probs, reverse=True)
    np.testing.assert_array_equal(after.probs[perm], state.probs)
    again, identity = gates.sort_step(after)
    np.testing.assert_array_equal(again.probs, after.probs)
    np.testing.assert_array_equal(identity, np.arange(4))


def test_sort_of_sands_diagonals():
    sort = GateSpec(GateKind.SORT)
    step1 = SandSDiagonal(np.array([1, -1, 1, -1, 1, -1, 1, -1]))
    np.testing.assert_array_equal(
        gates.apply_gate_sands(step1, sort).values, [1, 1, 1, 1, -1, -1, -1, -1])
    step5 = SandSDiagonal(np.array([3, 1, 1, -1, 1, -1, -1, -3]))
    np.testing.assert_array_equal(
        gates.apply_gate_sands(step5, sort).values, [3, 1, 1, 1, -1, -1, -1, -3])


def test_apply_gate_sands_matches_probability_gates():
    eps0 = 1e-3
    spec = GateSpec(GateKind.BCS_STEP, (0, 1, 2, 3))
    state = product_state([eps0, eps0, 0.0, 2 * eps0])
    via_probs = to_sands(gates.apply_gate(state, spec, eps0), eps0)
    via_sands = gates.apply_gate_sands(to_sands(state, eps0), spec)
    np.testing.assert_allclose(via_sands.values, via_probs.values, rtol=0, atol=1e-9)
