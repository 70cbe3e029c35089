"""
Simulation engines the schedulers drive.

bias - product states tracked as one bias per spin with the closed form updates.
exact - the full float64 diagonal with exact reset.
rational - the S&S diagonal as exact Fractions, reset taken to leading order in epsilon0.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from enum import Enum
from fractions import Fraction
import logging
import math
from numbers import Real

import numpy as np

from kbase._spincool import gates
from kbase._spincool import leading_order
from kbase._spincool.core import (
    BiasVector,
    DiagonalState,
    SandSDiagonal,
    SpinSystem,
    TraceRecord,
    check_spin,
    is_product_state,
    linear_sands,
    marginal_bias,
    marginal_biases,
    max_probability,
    mixed_state,
    product_state,
    sands_biases,
    to_sands,
)
from kbase._spincool.exceptions import BackendLimitError, BackendMismatchError, ResetSpinError
from kbase._spincool.gates import GateKind, GateSpec
from kbase._spincool.leading_order import UpdateMode
from kbase._spincool import logfields


EXACT_MAX_SPINS = 20
RATIONAL_MAX_SPINS = 6
SANDS_MAX_SPINS = 12
PRODUCT_TOL = 1e-6
_LEADING_ORDER_LIMIT = 0.1


class Backend(Enum):
    """ The simulation backends. """

    BIAS = "bias"
    EXACT = "exact"
    RATIONAL = "rational"


class InitialState(Enum):
    """ The state a run starts from. """

    MIXED = "mixed"
    """ The completely mixed state. """

    THERMAL = "thermal"
    """ Every spin at epsilon0. """

    RESET = "reset"
    """ Reset spins at epsilon0, computation spins completely mixed. """


def initial_units(system: SpinSystem, initial: InitialState) -> list[int]:
    """ Get the initial per spin biases in units of epsilon0. """
    match initial:
        case InitialState.MIXED:
            return [0] * system.n
        case InitialState.THERMAL:
            return [1] * system.n
        case InitialState.RESET:
            return [1 if s in system.reset_spins else 0 for s in range(system.n)]


class Engine(ABC):
    """
    A mutable simulation state plus the operations the schedulers apply to it.
    """

    backend: Backend = None

    def __init__(self, system: SpinSystem):
        self.system = system

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def epsilon0(self) -> Real:
        return self.system.epsilon0

    def _check_reset(self, spins: Sequence[int]):
        for s in spins:
            check_spin(s, self.n)
            if s not in self.system.reset_spins:
                raise ResetSpinError(f"Spin {s} is not a reset spin")

    @abstractmethod
    def biases(self) -> BiasVector:
        """ The current marginal biases. """
        raise NotImplementedError()

    def bias(self, spin: int) -> Real:
        """ The current marginal bias of one spin. """
        return self.biases()[spin]

    @abstractmethod
    def comp(self, spins: Sequence[int]):
        """ Compress the spins, cooling the first. """
        raise NotImplementedError()

    @abstractmethod
    def reset(self, spins: Sequence[int]):
        """ Thermalize reset spins. """
        raise NotImplementedError()

    @abstractmethod
    def swap(self, a: int, b: int):
        """ Swap the states of two spins. """
        raise NotImplementedError()

    def cnot(self, control: int, target: int):
        self._unsupported("CNOT")

    def not_gate(self, spin: int):
        self._unsupported("NOT")

    def cswap(self, control: int, t1: int, t2: int):
        self._unsupported("CSWAP")

    def sort(self):
        self._unsupported("SORT")

    def bcs(self, x: int, y: int, chain: Sequence[int]):
        self._unsupported("BCS")

    def sands(self) -> SandSDiagonal:
        """ The current S&S diagonal. """
        self._unsupported("S&S diagonals")

    def _unsupported(self, what: str):
        raise BackendMismatchError(f"The {self.backend.value} backend does not support {what}")

    @abstractmethod
    def max_prob(self) -> float:
        """ The largest basis state probability. """
        raise NotImplementedError()

    @abstractmethod
    def snapshot(self, step_index: int, label: str) -> TraceRecord:
        """ Record the current state. """
        raise NotImplementedError()

    def export(self, spins: Sequence[int]) -> tuple:
        """ Capture the state of a set of spins after a converged sub-level, for later restore. """
        self._unsupported("sub-level memoization")

    def restore(self, spins: Sequence[int], values: tuple):
        """ Put a set of spins back in a previously exported state. """
        self._unsupported("sub-level memoization")


class BiasEngine(Engine):
    """
    Tracks a product state as one bias per spin. Compressions move bias with
    leading_order.exchange_transfer, so the state is assumed to stay a product of its
    marginals.
    """

    backend = Backend.BIAS

    def __init__(
        self,
        system: SpinSystem,
        initial: InitialState = InitialState.RESET,
        mode: UpdateMode = UpdateMode.APPROX,
    ):
        super().__init__(system)
        self.mode = UpdateMode(mode)
        self._b = [u * system.epsilon0 for u in initial_units(system, initial)]
        if self.mode == UpdateMode.APPROX and 2 ** system.n * system.epsilon0 > _LEADING_ORDER_LIMIT:
            logging.getLogger(__name__).warning(
                f"2^n epsilon0 = {2 ** system.n * system.epsilon0:g} is not small, "
                + "leading order bias updates may be inaccurate",
                extra={logfields.SPINS: system.n, logfields.EPSILON0: system.epsilon0},
            )

    def biases(self) -> BiasVector:
        return BiasVector(tuple(self._b))

    def bias(self, spin: int) -> Real:
        return self._b[spin]

    def comp(self, spins: Sequence[int]):
        GateSpec(GateKind.COMP_EXCHANGE, tuple(spins)).check_range(self.n)
        top, others = spins[0], spins[1:]
        moved = leading_order.exchange_transfer(
            self._b[top], [self._b[s] for s in others], self.mode)
        self._b[top] += moved
        for s in others:
            self._b[s] -= moved

    def reset(self, spins: Sequence[int]):
        self._b = list(leading_order.reset_bias(self.biases(), spins, self.system).biases)

    def swap(self, a: int, b: int):
        GateSpec(GateKind.SWAP, (a, b)).check_range(self.n)
        self._b[a], self._b[b] = self._b[b], self._b[a]

    def bcs(self, x: int, y: int, chain: Sequence[int]):
        # on three spins the subroutine leaves the chain end with the 3B-Comp bias
        if self.n != 3 or len(chain) != 1:
            self._unsupported("BCS beyond three spins")
        self.comp((chain[0], y, x))

    def max_prob(self) -> float:
        return math.prod((1 + abs(b)) / 2 for b in self._b)

    def snapshot(self, step_index: int, label: str) -> TraceRecord:
        return TraceRecord(
            step_index=step_index,
            label=label,
            bias_config=self.biases(),
            max_prob=self.max_prob(),
            product_state=True,
        )

    def export(self, spins: Sequence[int]) -> tuple:
        return tuple(self._b[s] for s in spins)

    def restore(self, spins: Sequence[int], values: tuple):
        for s, v in zip(spins, values, strict=True):
            self._b[s] = v


class _PermutationEngine(Engine):
    """ Shared gate plumbing for the engines that hold a full diagonal. """

    def _apply(self, spec: GateSpec):
        raise NotImplementedError()

    def comp(self, spins: Sequence[int]):
        self._apply(GateSpec(GateKind.COMP_EXCHANGE, tuple(spins)))

    def reset(self, spins: Sequence[int]):
        self._check_reset(spins)
        for s in spins:
            self._apply(GateSpec(GateKind.RESET, (s,)))

    def swap(self, a: int, b: int):
        self._apply(GateSpec(GateKind.SWAP, (a, b)))

    def cnot(self, control: int, target: int):
        self._apply(GateSpec(GateKind.CNOT, (control, target)))

    def not_gate(self, spin: int):
        self._apply(GateSpec(GateKind.NOT, (spin,)))

    def cswap(self, control: int, t1: int, t2: int):
        self._apply(GateSpec(GateKind.CSWAP, (control, t1, t2)))

    def sort(self):
        self._apply(GateSpec(GateKind.SORT))

    def bcs(self, x: int, y: int, chain: Sequence[int]):
        self._apply(GateSpec(GateKind.BCS_STEP, (x, y, *chain)))


class DiagonalEngine(_PermutationEngine):
    """
    Holds the full float64 probability vector. Gates permute it and reset is exact.
    """

    backend = Backend.EXACT

    def __init__(self, system: SpinSystem, initial: InitialState = InitialState.RESET):
        super().__init__(system)
        if system.n > EXACT_MAX_SPINS:
            raise BackendLimitError(
                f"The exact backend supports at most {EXACT_MAX_SPINS} spins, got {system.n}")
        units = initial_units(system, initial)
        if any(units):
            self.state = product_state([u * system.epsilon0 for u in units])
        else:
            self.state = mixed_state(system.n)

    def _apply(self, spec: GateSpec):
        spec.check_range(self.n)
        self.state = gates.apply_gate(self.state, spec, self.epsilon0)

    def biases(self) -> BiasVector:
        return marginal_biases(self.state)

    def bias(self, spin: int) -> Real:
        return marginal_bias(self.state, spin)

    def sands(self) -> SandSDiagonal:
        return to_sands(self.state, self.epsilon0)

    def max_prob(self) -> float:
        return max_probability(self.state)

    def snapshot(self, step_index: int, label: str) -> TraceRecord:
        small = self.n <= SANDS_MAX_SPINS
        return TraceRecord(
            step_index=step_index,
            label=label,
            bias_config=self.biases(),
            max_prob=self.max_prob(),
            sands=self.sands() if small else None,
            product_state=is_product_state(self.state, self.epsilon0, PRODUCT_TOL) if small else None,
        )

    def _low_block(self, spins: Sequence[int]) -> int:
        if tuple(spins) != tuple(range(len(spins))):
            self._unsupported("memoizing spins other than 0 to j - 1")
        return 1 << len(spins)

    def export(self, spins: Sequence[int]) -> tuple:
        """ The joint distribution of spins 0 to j - 1. """
        block = self._low_block(spins)
        return tuple(self.state.probs.reshape(-1, block).sum(axis=0))

    def restore(self, spins: Sequence[int], values: tuple):
        """
        Replace the joint distribution of spins 0 to j - 1 with an exported one, uncorrelated
        with the remaining spins. An exhaustively repeated sub-level on those spins converges
        to the same distribution whatever the remaining spins hold.
        """
        block = self._low_block(spins)
        outer = self.state.probs.reshape(-1, block).sum(axis=1)
        self.state = DiagonalState(np.outer(outer, np.array(values, dtype=float)).ravel())


def exact_epsilon0(epsilon0: Real) -> Fraction:
    """
    Convert epsilon0 to a Fraction through its shortest decimal form, so 1e-6 becomes
    exactly 1/1000000.
    """
    if isinstance(epsilon0, Fraction):
        return epsilon0
    return Fraction(repr(float(epsilon0)))


class SandSEngine(_PermutationEngine):
    """
    Holds the S&S diagonal as exact Fractions in the limit of small epsilon0. Gates permute
    the diagonal and reset replaces each pair of entries with their average plus and minus
    one. Biases are exact multiples of epsilon0.
    """

    backend = Backend.RATIONAL

    def __init__(self, system: SpinSystem, initial: InitialState = InitialState.MIXED):
        super().__init__(system)
        if system.n > RATIONAL_MAX_SPINS:
            raise BackendLimitError(
                f"The rational backend supports at most {RATIONAL_MAX_SPINS} spins, "
                + f"got {system.n}")
        self.unit = exact_epsilon0(system.epsilon0)
        self.diag = linear_sands([Fraction(u) for u in initial_units(system, initial)])

    @property
    def epsilon0(self) -> Fraction:
        return self.unit

    def _apply(self, spec: GateSpec):
        spec.check_range(self.n)
        self.diag = gates.apply_gate_sands(self.diag, spec)

    def units(self) -> tuple[Fraction, ...]:
        """ The current biases in units of epsilon0. """
        return sands_biases(self.diag)

    def biases(self) -> BiasVector:
        return BiasVector(tuple(u * self.unit for u in self.units()))

    def sands(self) -> SandSDiagonal:
        return self.diag

    def max_prob(self) -> float:
        return float((1 + self.unit * max(self.diag.values)) / (1 << self.n))

    def is_product(self) -> bool:
        """ Whether the diagonal is exactly the leading order diagonal of its marginals. """
        return linear_sands(list(self.units())) == self.diag

    def snapshot(self, step_index: int, label: str) -> TraceRecord:
        return TraceRecord(
            step_index=step_index,
            label=label,
            bias_config=self.biases(),
            max_prob=self.max_prob(),
            sands=self.diag,
            product_state=self.is_product(),
        )


def make_engine(
    backend: Backend | str,
    system: SpinSystem,
    initial: InitialState | str = InitialState.RESET,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> Engine:
    """
    Create a simulation engine.

    backend - the backend to use.
    system - the spin system.
    initial - the starting state.
    mode - the bias update form for the bias backend. Ignored by the other backends.
    """
    backend = Backend(backend)
    initial = InitialState(initial)
    match backend:
        case Backend.BIAS:
            return BiasEngine(system, initial, UpdateMode(mode))
        case Backend.EXACT:
            return DiagonalEngine(system, initial)
        case Backend.RATIONAL:
            return SandSEngine(system, initial)
