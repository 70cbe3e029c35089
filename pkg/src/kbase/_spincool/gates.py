"""
Exact operations on diagonal states: compression exchanges, classical logic gates, reset and
sort.

Every gate except reset relabels basis states, so it is represented as a destination index
array: the probability at basis index i moves to index dest[i]. The same arrays act on S&S
diagonals, which is how the rational backend shares the gates.
"""

from collections.abc import Collection, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cache
from numbers import Real

import numpy as np

from kbase._spincool.core import DiagonalState, SandSDiagonal, check_spin
from kbase._spincool.exceptions import (
    GateOperandError,
    ResetSpinError,
)


class GateKind(Enum):
    """ The gate vocabulary. """

    COMP_EXCHANGE = "comp"
    CNOT = "cnot"
    NOT = "not"
    CSWAP = "cswap"
    SWAP = "swap"
    RESET = "reset"
    SORT = "sort"
    BCS_STEP = "bcs"


_ARITY = {
    GateKind.CNOT: 2,
    GateKind.NOT: 1,
    GateKind.CSWAP: 3,
    GateKind.SWAP: 2,
    GateKind.RESET: 1,
    GateKind.SORT: 0,
}


@dataclass(frozen=True)
class GateSpec:
    """
    A gate and its operands.

    Operand order by kind:
    COMP_EXCHANGE - the cooled spin first, then the other ℓ - 1 spins, ℓ >= 3.
    CNOT - control, target.
    CSWAP - control, then the two swapped spins.
    BCS_STEP - x, y, then the relocation chain (at least one spin).
    """

    kind: GateKind
    """ The kind of gate. """

    operands: tuple[int, ...] = ()
    """ The spin operands. """

    def __post_init__(self):
        ops = tuple(self.operands)
        object.__setattr__(self, "operands", ops)
        if self.kind in _ARITY:
            if len(ops) != _ARITY[self.kind]:
                raise GateOperandError(
                    f"{self.kind.value} takes {_ARITY[self.kind]} operands, got {len(ops)}")
        elif len(ops) < 3:
            raise GateOperandError(
                f"{self.kind.value} takes at least 3 operands, got {len(ops)}")
        if len(set(ops)) != len(ops):
            raise GateOperandError(f"{self.kind.value} operands must be distinct: {ops}")

    @property
    def is_permutation(self) -> bool:
        return self.kind not in (GateKind.RESET, GateKind.SORT)

    def check_range(self, n: int):
        """ Check the operands are in range for an n spin system. """
        for s in self.operands:
            check_spin(s, n)


def _bit(idx: np.ndarray, spin: int) -> np.ndarray:
    return (idx >> spin) & 1


def _swap_bits(idx: np.ndarray, a: int, b: int, cond: np.ndarray | int = 1) -> np.ndarray:
    diff = (_bit(idx, a) ^ _bit(idx, b)) & cond
    return idx ^ ((diff << a) | (diff << b))


@cache
def _destinations(spec: GateSpec, n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    ops = spec.operands
    match spec.kind:
        case GateKind.CNOT:
            dest = idx ^ (_bit(idx, ops[0]) << ops[1])
        case GateKind.NOT:
            dest = idx ^ (1 << ops[0])
        case GateKind.SWAP:
            dest = _swap_bits(idx, ops[0], ops[1])
        case GateKind.CSWAP:
            dest = _swap_bits(idx, ops[1], ops[2], _bit(idx, ops[0]))
        case GateKind.COMP_EXCHANGE:
            mask = sum(1 << s for s in ops)
            cooled = 1 << ops[0]
            sub = idx & mask
            dest = np.where((sub == cooled) | (sub == mask ^ cooled), idx ^ mask, idx)
        case GateKind.BCS_STEP:
            dest = idx
            for step in bcs_sequence(ops[0], ops[1], ops[2:]):
                dest = _destinations(step, n)[dest]
        case _:
            raise GateOperandError(f"{spec.kind.value} is not a permutation gate")
    dest.flags.writeable = False
    return dest


def permutation(spec: GateSpec, n: int) -> np.ndarray:
    """
    Get the destination index array of a permutation gate on n spins.

    spec - the gate.
    n - the number of spins.
    """
    spec.check_range(n)
    return _destinations(spec, n)


def permute(values: np.ndarray, dest: np.ndarray) -> np.ndarray:
    """ Move values[i] to position dest[i]. """
    out = np.empty_like(values)
    out[dest] = values
    return out


def bcs_sequence(x: int, y: int, chain: Sequence[int]) -> list[GateSpec]:
    """
    Get the elementary gates of the basic compression subroutine: CNOT with y controlling x,
    NOT on x, then the relocation of y's state along the chain, alternating CSWAP gates
    controlled by x with plain SWAP gates.

    x - the spin that ends up holding the parity of the pair.
    y - the spin whose bias is doubled when x reads up.
    chain - the spins the doubled bias is relocated along, nearest first.
    """
    if not chain:
        raise GateOperandError("The BCS relocation chain requires at least one spin")
    seq = [GateSpec(GateKind.CNOT, (y, x)), GateSpec(GateKind.NOT, (x,))]
    prev = y
    for i, target in enumerate(chain):
        if i % 2 == 0:
            seq.append(GateSpec(GateKind.CSWAP, (x, prev, target)))
        else:
            seq.append(GateSpec(GateKind.SWAP, (prev, target)))
        prev = target
    return seq


def _apply_permutation(state: DiagonalState, spec: GateSpec) -> DiagonalState:
    return DiagonalState(permute(state.probs, permutation(spec, state.n)))


def comp_exchange(state: DiagonalState, spins: Sequence[int]) -> DiagonalState:
    """
    Exchange the basis states that read 10...0 and 01...1 on the given spins, for every
    assignment of the other spins.

    state - the state.
    spins - the operand spins, the cooled spin first.
    """
    return _apply_permutation(state, GateSpec(GateKind.COMP_EXCHANGE, tuple(spins)))


def cnot(state: DiagonalState, control: int, target: int) -> DiagonalState:
    """ Flip the target spin where the control spin is down. """
    return _apply_permutation(state, GateSpec(GateKind.CNOT, (control, target)))


def not_gate(state: DiagonalState, spin: int) -> DiagonalState:
    """ Flip a spin. """
    return _apply_permutation(state, GateSpec(GateKind.NOT, (spin,)))


def cswap(state: DiagonalState, control: int, t1: int, t2: int) -> DiagonalState:
    """ Swap two spins where the control spin is down. """
    return _apply_permutation(state, GateSpec(GateKind.CSWAP, (control, t1, t2)))


def swap(state: DiagonalState, s1: int, s2: int) -> DiagonalState:
    """ Swap two spins. A swap of a reset spin onto a computation spin is a polarization transfer. """
    return _apply_permutation(state, GateSpec(GateKind.SWAP, (s1, s2)))


def bcs_step(state: DiagonalState, x: int, y: int, chain: Sequence[int]) -> DiagonalState:
    """
    Apply the basic compression subroutine. See bcs_sequence for the gates.
    """
    return _apply_permutation(state, GateSpec(GateKind.BCS_STEP, (x, y, *chain)))


def gate_comp(state: DiagonalState, c: int, b: int, a: int) -> DiagonalState:
    """
    Compress three spins with CNOT, NOT and CSWAP gates, cooling spin c. Leaves spin c with
    the same marginal as comp_exchange(state, (c, b, a)).
    """
    return bcs_step(state, a, b, (c,))


def _check_reset(spin: int, n: int, reset_spins: Collection[int] | None):
    check_spin(spin, n)
    if reset_spins is not None and spin not in reset_spins:
        raise ResetSpinError(f"Spin {spin} is not a reset spin")


def _split(values: np.ndarray, spin: int, n: int) -> np.ndarray:
    return values.reshape(1 << (n - 1 - spin), 2, 1 << spin)


def reset(
    state: DiagonalState,
    spin: int,
    epsilon0: Real,
    reset_spins: Collection[int] | None = None,
) -> DiagonalState:
    """
    Thermalize a reset spin. The combined probability of each pair of basis states that
    differ only in the spin is split (1 + epsilon0) / 2 to the spin up member and
    (1 - epsilon0) / 2 to the spin down member.

    state - the state.
    spin - the spin to reset.
    epsilon0 - the equilibrium bias.
    reset_spins - the designated reset spins. If supplied the spin must be one of them.
    """
    _check_reset(spin, state.n, reset_spins)
    pairs = _split(state.probs, spin, state.n)
    total = pairs.sum(axis=1)
    out = np.empty_like(pairs)
    out[:, 0, :] = total * (1 + epsilon0) / 2
    out[:, 1, :] = total - out[:, 0, :]
    if not state.exact:
        # keep the total at 1 in float arithmetic
        out /= out.sum()
    return DiagonalState(out.ravel())


def reset_sands(
    diag: SandSDiagonal, spin: int, reset_spins: Collection[int] | None = None
) -> SandSDiagonal:
    """
    Reset a spin on an S&S diagonal to leading order in epsilon0: each pair of entries that
    differ only in the spin becomes (average + 1, average - 1).

    diag - the S&S diagonal.
    spin - the spin to reset.
    reset_spins - the designated reset spins. If supplied the spin must be one of them.
    """
    n = diag.n
    _check_reset(spin, n, reset_spins)
    pairs = _split(diag.values, spin, n)
    avg = pairs.sum(axis=1) / 2
    out = np.empty_like(pairs)
    out[:, 0, :] = avg + 1
    out[:, 1, :] = avg - 1
    return SandSDiagonal(out.ravel())


def descending_order(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Sort values in non-increasing order. Ties keep their original order.

    Returns the sorted values and the permutation mapping each old index to its new index.
    """
    if values.dtype == object:
        order = np.array(sorted(range(len(values)), key=lambda i: -values[i]), dtype=np.int64)
    else:
        order = np.argsort(-values, kind="stable")
    perm = np.empty_like(order)
    perm[order] = np.arange(len(order))
    return values[order], perm


def sort_step(state: DiagonalState) -> tuple[DiagonalState, np.ndarray]:
    """
    Sort the basis state probabilities in non-increasing order.

    Returns the sorted state and the permutation mapping each old index to its new index.
    """
    probs, perm = descending_order(state.probs)
    return DiagonalState(probs), perm


def apply_gate(
    state: DiagonalState,
    spec: GateSpec,
    epsilon0: Real | None = None,
    reset_spins: Collection[int] | None = None,
) -> DiagonalState:
    """
    Apply any gate to a state.

    state - the state.
    spec - the gate.
    epsilon0 - the equilibrium bias, required for reset.
    reset_spins - the designated reset spins, checked for reset if supplied.
    """
    match spec.kind:
        case GateKind.RESET:
            if epsilon0 is None:
                raise GateOperandError("reset requires epsilon0")
            return reset(state, spec.operands[0], epsilon0, reset_spins)
        case GateKind.SORT:
            return sort_step(state)[0]
        case _:
            return _apply_permutation(state, spec)


def apply_gate_sands(
    diag: SandSDiagonal, spec: GateSpec, reset_spins: Collection[int] | None = None
) -> SandSDiagonal:
    """
    Apply any gate to an S&S diagonal, with reset taken to leading order in epsilon0.
    """
    match spec.kind:
        case GateKind.RESET:
            return reset_sands(diag, spec.operands[0], reset_spins)
        case GateKind.SORT:
            return SandSDiagonal(descending_order(diag.values)[0])
        case _:
            return SandSDiagonal(permute(diag.values, permutation(spec, diag.n)))
