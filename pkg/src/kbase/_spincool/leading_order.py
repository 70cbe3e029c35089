"""
Closed form bias updates for product states.

The approximate forms keep the leading order in the biases and are valid while 2^n epsilon0
is much smaller than 1. The exact forms hold for any product state input.
"""

from collections.abc import Iterable, Sequence
from enum import Enum
import math
from numbers import Real

from kbase._spincool.core import (
    BiasVector,
    SpinSystem,
    check_spin,
    marginal_bias,
    product_state,
)
from kbase._spincool.exceptions import BiasRangeError, GateOperandError, ResetSpinError
from kbase._spincool import gates


class UpdateMode(Enum):
    """ Which form of the bias update to use. """

    EXACT = "exact"
    APPROX = "approx"


def _check_biases(*biases: Real):
    for b in biases:
        if not -1 <= b <= 1:
            raise BiasRangeError(f"Bias {b} is outside [-1, 1]")


def comp3_update(eC: Real, eB: Real, eA: Real, mode: UpdateMode | str = UpdateMode.EXACT) -> Real:
    """
    The bias of the cooled spin C after a 3B-Comp on a product state.

    eC - the bias of the cooled spin.
    eB, eA - the biases of the other two spins.
    mode - exact gives (eC + eB + eA - eC eB eA) / 2, approx drops the cubic term.
    """
    _check_biases(eC, eB, eA)
    if UpdateMode(mode) == UpdateMode.EXACT:
        return (eC + eB + eA - eC * eB * eA) / 2
    return (eC + eB + eA) / 2


def exchange_transfer(
    e_top: Real, others: Sequence[Real], mode: UpdateMode | str = UpdateMode.APPROX
) -> Real:
    """
    The bias an ℓ spin compression moves onto the cooled spin of a product state. The cooled
    spin gains the amount and every other operand loses it.

    e_top - the bias of the cooled spin.
    others - the biases of the other ℓ - 1 operands, ℓ >= 3.
    mode - approx gives 2^(2 - ℓ)(sum(others) - e_top); exact gives twice the probability
        difference between the 10...0 and 01...1 operand states.
    """
    if len(others) < 2:
        raise GateOperandError(f"A compression needs at least 3 spins, got {len(others) + 1}")
    _check_biases(e_top, *others)
    width = len(others) + 1
    if UpdateMode(mode) == UpdateMode.APPROX:
        return (sum(others) - e_top) / 2 ** (width - 2)
    p_down_up = (1 - e_top) * math.prod(1 + o for o in others)
    p_up_down = (1 + e_top) * math.prod(1 - o for o in others)
    return (p_down_up - p_up_down) / 2 ** (width - 1)


def _exchange_oracle(e_top: Real, others: Sequence[Real]) -> Real:
    # biases listed cooled spin first map to spins n - 1 ... 0
    biases = [e_top, *others]
    n = len(biases)
    state = product_state(list(reversed(biases)))
    after = gates.comp_exchange(state, tuple(range(n - 1, -1, -1)))
    return marginal_bias(after, n - 1)


def comp4_update(
    eD: Real, eC: Real, eB: Real, eA: Real, mode: UpdateMode | str = UpdateMode.APPROX
) -> Real:
    """
    The bias of the cooled spin D after a 4B-Comp on a product state.

    mode - approx gives (eA + eB + eC + 3 eD) / 4; exact applies the |1000> <-> |0111>
        exchange to the 16 state product vector.
    """
    return compk_update(eD, (eC, eB, eA), 3, mode)


def compk_update(
    e_top: Real, others: Sequence[Real], k: int, mode: UpdateMode | str = UpdateMode.APPROX
) -> Real:
    """
    The bias of the cooled spin after a (k+1)B-Comp on a product state.

    e_top - the bias of the cooled spin.
    others - the biases of the k other operands.
    k - the number of other operands, k >= 2.
    mode - approx gives ((2^(k-1) - 1) e_top + sum(others)) / 2^(k-1); exact applies the
        exchange to the explicit product vector.
    """
    if k < 2:
        raise GateOperandError(f"k must be at least 2, got {k}")
    if len(others) != k:
        raise GateOperandError(f"Expected {k} other biases, got {len(others)}")
    _check_biases(e_top, *others)
    if UpdateMode(mode) == UpdateMode.EXACT:
        return _exchange_oracle(e_top, others)
    return ((2 ** (k - 1) - 1) * e_top + sum(others)) / 2 ** (k - 1)


def reset_bias(vec: BiasVector, spins: Iterable[int], system: SpinSystem) -> BiasVector:
    """
    Thermalize reset spins: set their biases to epsilon0.

    vec - the biases.
    spins - the spins to reset. Each must be a reset spin of the system.
    system - the spin system.
    """
    biases = list(vec.biases)
    for s in spins:
        check_spin(s, len(biases))
        if s not in system.reset_spins:
            raise ResetSpinError(f"Spin {s} is not a reset spin")
        biases[s] = system.epsilon0
    return BiasVector(tuple(biases))
