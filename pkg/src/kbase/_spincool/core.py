"""
Domain types shared by the simulation backends and the schedulers.

Basis state indexes use spin 0 as the least significant bit. In the algorithm descriptions
spins are listed from the left as A_n, ..., A_1, so A_1 is spin 0 and A_n is spin n - 1.

Probabilities may be numpy float64 vectors or numpy object vectors holding
fractions.Fraction values. The functions here work with either.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import math
from numbers import Real
from typing import Callable, Iterable, Sequence

import numpy as np

from kbase._spincool.exceptions import (
    BiasRangeError,
    InvariantViolationError,
    ScheduleError,
    SpinIndexError,
    SpinSystemError,
)


_TANH_REL_TOL = 1e-15
_PROB_SUM_TOL = 1e-12


def check_spin(spin: int, n: int):
    """
    Check that a spin index is in range for an n spin system.

    spin - the spin index.
    n - the number of spins.
    """
    if not isinstance(spin, (int, np.integer)) or isinstance(spin, bool):
        raise SpinIndexError(f"Spin index must be an integer, got {spin!r}")
    if not 0 <= spin < n:
        raise SpinIndexError(f"Spin index {spin} is out of range for {n} spins")


@dataclass(frozen=True, kw_only=True)
class SpinSystem:
    """
    The static configuration of a spin system.
    """

    n: int
    """ The number of spins. """

    reset_spins: frozenset[int]
    """ The indexes of the rapidly thermalizing reset spins. """

    epsilon0: float
    """ The equilibrium polarization bias of a reset spin, 0 < epsilon0 < 1. """

    epsilon: float
    """ The inverse temperature parameter where epsilon0 = tanh(epsilon). """

    def __post_init__(self):
        if self.n < 1:
            raise SpinSystemError(f"A spin system requires at least one spin, got {self.n}")
        for s in self.reset_spins:
            check_spin(s, self.n)
        if not 0 < self.epsilon0 < 1:
            raise SpinSystemError(f"epsilon0 must be in (0, 1), got {self.epsilon0}")
        if not math.isclose(math.tanh(self.epsilon), self.epsilon0, rel_tol=_TANH_REL_TOL):
            raise SpinSystemError(
                f"epsilon0 {self.epsilon0} is not tanh(epsilon) for epsilon {self.epsilon}")

    @classmethod
    def create(
        cls,
        n: int,
        reset_spins: Iterable[int],
        epsilon0: float | None = None,
        epsilon: float | None = None,
    ) -> "SpinSystem":
        """
        Create a spin system from either epsilon0 or epsilon. If both are supplied they
        must agree.

        n - the number of spins.
        reset_spins - the reset spin indexes.
        epsilon0 - the equilibrium bias.
        epsilon - the inverse temperature parameter.
        """
        if epsilon0 is None and epsilon is None:
            raise SpinSystemError("One of epsilon0 or epsilon is required")
        if epsilon is None:
            if not 0 < epsilon0 < 1:
                raise SpinSystemError(f"epsilon0 must be in (0, 1), got {epsilon0}")
            epsilon = math.atanh(epsilon0)
        elif epsilon0 is None:
            epsilon0 = math.tanh(epsilon)
        return cls(
            n=n, reset_spins=frozenset(reset_spins), epsilon0=epsilon0, epsilon=epsilon
        )

    @property
    def computation_spins(self) -> tuple[int, ...]:
        """ The spins that are not reset spins, in index order. """
        return tuple(s for s in range(self.n) if s not in self.reset_spins)

    def require_reset_spins(self, spins: Iterable[int], purpose: str):
        """ Throw a SpinSystemError if any of the spins is not a reset spin. """
        missing = sorted(set(spins) - self.reset_spins)
        if missing:
            raise SpinSystemError(f"{purpose} requires reset spins {missing}")


@dataclass(frozen=True)
class BiasVector:
    """
    One polarization bias per spin, indexed by spin. Values are absolute biases, not
    multiples of epsilon0.
    """

    biases: tuple[Real, ...]
    """ The biases, floats or Fractions, each in [-1, 1]. """

    def __post_init__(self):
        object.__setattr__(self, "biases", tuple(self.biases))
        for i, b in enumerate(self.biases):
            if not -1 <= b <= 1:
                raise BiasRangeError(f"Bias {b} of spin {i} is outside [-1, 1]")

    @property
    def n(self) -> int:
        return len(self.biases)

    def __len__(self):
        return len(self.biases)

    def __getitem__(self, spin: int) -> Real:
        return self.biases[spin]

    def in_units(self, epsilon0: Real) -> tuple[Real, ...]:
        """ Get the biases as multiples of epsilon0. """
        return tuple(b / epsilon0 for b in self.biases)


def _is_exact(values: np.ndarray) -> bool:
    return values.dtype == object


def _as_vector(values: Sequence[Real] | np.ndarray) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != object and not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if arr.ndim != 1:
        raise InvariantViolationError(f"Expected a one dimensional vector, got shape {arr.shape}")
    return arr


def _spin_count(length: int) -> int:
    n = length.bit_length() - 1
    if n < 1 or 1 << n != length:
        raise InvariantViolationError(
            f"Vector length {length} is not a power of two for one or more spins")
    return n


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """
    The diagonal of a density matrix as a probability vector over the 2^n basis states.
    """

    probs: np.ndarray
    """ The basis state probabilities, float64 or exact Fractions. """

    n: int = field(init=False)
    """ The number of spins. """

    def __post_init__(self):
        probs = _as_vector(self.probs)
        n = _spin_count(len(probs))
        if not np.all(probs >= 0):
            raise InvariantViolationError("Probabilities must be non-negative")
        total = probs.sum()
        if abs(total - 1) > _PROB_SUM_TOL:
            raise InvariantViolationError(f"Probabilities sum to {total}, not 1")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "n", n)

    @property
    def exact(self) -> bool:
        """ True if the probabilities are Fractions. """
        return _is_exact(self.probs)


@dataclass(frozen=True)
class SandSDiagonal:
    """
    A shifted and scaled diagonal, p' = 2^n(p - 2^-n) / epsilon0, so a basis state's
    probability is expressed around uniform in units of epsilon0.
    """

    values: np.ndarray
    """ The S&S entries, float64 or exact Fractions. """

    def __post_init__(self):
        values = _as_vector(self.values).copy()
        _spin_count(len(values))
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return _spin_count(len(self.values))

    def __eq__(self, other):
        if not isinstance(other, SandSDiagonal):
            return NotImplemented
        return len(self.values) == len(other.values) and bool(all(self.values == other.values))

    def __hash__(self):
        return hash(tuple(self.values))


class Algorithm(Enum):
    """ The cooling algorithms. """

    FERNANDEZ = "fernandez"
    FIBONACCI = "fibonacci"
    TRIBONACCI = "tribonacci"
    KBONACCI = "kbonacci"
    ALLBONACCI = "allbonacci"
    PAC1 = "pac1"
    PAC2 = "pac2"
    PPA = "ppa"
    BCS = "bcs"


class Mode(Enum):
    """ How the repetitions of a recursion level are terminated. """

    REPS = "reps"
    """ A fixed repetition count per level. """

    EXHAUSTIVE = "exhaustive"
    """ Repeat each level until its target bias converges. """


@dataclass(frozen=True, kw_only=True)
class Schedule:
    """
    An instance of an algorithm: the algorithm, its parameters and how it terminates.
    """

    algorithm: Algorithm
    """ The algorithm to run. """

    k: int | None = None
    """ The compression width parameter for the k-bonacci algorithm. """

    L: int | None = None
    """ The number of PAC recursion levels. """

    reps: tuple[int, ...] | None = None
    """
    The per level repetition counts m_n, ..., m_3, listed from the top level down. Setting
    reps selects reps mode; otherwise delta drives termination.
    """

    delta: float = 1e-6
    """ The convergence tolerance in units of epsilon0 for exhaustive mode and the PPA. """

    max_steps: int = 10_000_000
    """ The cap on the number of elementary steps for the whole run. """

    max_level_reps: int = 100_000
    """ The cap on the repetitions of any single exhaustive recursion level. """

    inner_reps: Callable[[int, int], int | None] | None = None
    """
    An optional override for repetition counts. Called with the level (the number of spins
    the level operates on) and the repetition index of the enclosing level; returning None
    falls back to reps.
    """

    trace_depth: int | None = None
    """
    The deepest recursion level whose elementary steps are recorded, 0 being the top level.
    None records every step in reps mode and only the top level in exhaustive mode.
    """

    memoize: bool = True
    """ Whether the bias and exact backends reuse the converged result of exhaustive sub-levels. """

    def __post_init__(self):
        if self.reps is not None:
            object.__setattr__(self, "reps", tuple(self.reps))
            if any(m < 0 for m in self.reps):
                raise ScheduleError(f"Repetition counts must be non-negative: {self.reps}")
        if not self.delta > 0:
            raise ScheduleError(f"delta must be positive, got {self.delta}")
        if self.max_steps < 0:
            raise ScheduleError(f"max_steps must be non-negative, got {self.max_steps}")
        if self.max_level_reps < 1:
            raise ScheduleError(f"max_level_reps must be positive, got {self.max_level_reps}")
        if self.trace_depth is not None and self.trace_depth < 0:
            raise ScheduleError(f"trace_depth must be non-negative, got {self.trace_depth}")

    @property
    def mode(self) -> Mode:
        return Mode.EXHAUSTIVE if self.reps is None else Mode.REPS

    @property
    def effective_trace_depth(self) -> int | None:
        if self.trace_depth is not None:
            return self.trace_depth
        return None if self.mode == Mode.REPS else 0

    def validate(self, n: int):
        """
        Check the schedule against a spin count.

        n - the number of spins in the system the schedule will run on.
        """
        alg = self.algorithm
        if alg == Algorithm.KBONACCI:
            if self.k is None or not 2 <= self.k <= n - 1:
                raise ScheduleError(f"k-bonacci requires 2 <= k <= n - 1, got k={self.k}, n={n}")
        if alg in (Algorithm.PAC1, Algorithm.PAC2):
            if self.L is None or self.L < 1:
                raise ScheduleError(f"{alg.value} requires L >= 1, got {self.L}")


@dataclass(frozen=True, kw_only=True)
class TraceRecord:
    """
    A snapshot of a run after one step.
    """

    step_index: int
    """ The number of elementary steps executed so far. """

    label: str
    """ The name of the step, for example 3B-Comp, RESET or SORT. """

    bias_config: BiasVector
    """ The single spin marginal biases. """

    max_prob: float
    """ The largest basis state probability. """

    sands: SandSDiagonal | None = None
    """ The S&S diagonal, if the backend holds the full diagonal and it is small enough. """

    product_state: bool | None = None
    """
    Whether the state is the tensor product of its marginals. When False the biases cannot
    be read as spin temperatures. None if unknown.
    """


def _uniform(n: int, exact: bool) -> Real:
    return Fraction(1, 1 << n) if exact else 2.0 ** -n


def _sign_matrix(n: int) -> np.ndarray:
    idx = np.arange(1 << n)[:, None]
    return 1 - 2 * ((idx >> np.arange(n)[None, :]) & 1)


def mixed_state(n: int, exact: bool = False) -> DiagonalState:
    """ The completely mixed state on n spins. """
    u = _uniform(n, exact)
    return DiagonalState(np.array([u] * (1 << n), dtype=object if exact else np.float64))


def product_state(biases: Sequence[Real]) -> DiagonalState:
    """
    The tensor product state with the given per spin biases, indexed by spin.
    """
    exact = any(isinstance(b, Fraction) for b in biases)
    dtype = object if exact else np.float64
    one = Fraction(1) if exact else 1.0
    vec = np.array([one], dtype=dtype)
    for b in reversed(biases):
        if not -1 <= b <= 1:
            raise BiasRangeError(f"Bias {b} is outside [-1, 1]")
        vec = np.outer(vec, np.array([(one + b) / 2, (one - b) / 2], dtype=dtype)).ravel()
    return DiagonalState(vec)


def thermal_state(n: int, epsilon0: Real) -> DiagonalState:
    """ Every spin at the equilibrium bias. """
    return product_state([epsilon0] * n)


def _split(values: np.ndarray, spin: int) -> np.ndarray:
    # axis 1 of the view is the given spin's bit
    n = _spin_count(len(values))
    return values.reshape(1 << (n - 1 - spin), 2, 1 << spin)


def marginal_bias(state: DiagonalState, spin: int) -> Real:
    """
    Get P(spin up) - P(spin down) for one spin.

    state - the state.
    spin - the spin index.
    """
    check_spin(spin, state.n)
    halves = _split(state.probs, spin).sum(axis=(0, 2))
    return halves[0] - halves[1]


def marginal_biases(state: DiagonalState) -> BiasVector:
    """ Get the marginal bias of every spin. """
    return BiasVector(tuple(_clip(marginal_bias(state, s)) for s in range(state.n)))


def _clip(b: Real) -> Real:
    # float summation can land a hair outside [-1, 1] for fully polarized spins
    if isinstance(b, Fraction):
        return b
    return min(1.0, max(-1.0, float(b)))


def to_sands(state: DiagonalState, epsilon0: Real) -> SandSDiagonal:
    """
    Shift and scale a state: p' = 2^n(p - 2^-n) / epsilon0.

    state - the state.
    epsilon0 - the equilibrium bias used as the unit.
    """
    if epsilon0 == 0:
        raise SpinSystemError("epsilon0 must be non-zero to shift and scale a state")
    n = state.n
    return SandSDiagonal((1 << n) * (state.probs - _uniform(n, state.exact)) / epsilon0)


def from_sands(diag: SandSDiagonal, epsilon0: Real) -> DiagonalState:
    """
    Invert the shift and scale transform: p = 2^-n(epsilon0 p' + 1).

    diag - the S&S diagonal.
    epsilon0 - the equilibrium bias used as the unit.
    """
    if epsilon0 == 0:
        raise SpinSystemError("epsilon0 must be non-zero to shift and scale a state")
    n = diag.n
    exact = _is_exact(diag.values)
    return DiagonalState((epsilon0 * diag.values + 1) * _uniform(n, exact))


def linear_sands(units: Sequence[Real]) -> SandSDiagonal:
    """
    The leading order S&S diagonal of a product state, p'(x) = sum_i s_i(x) u_i, where s_i is
    +1 for spin i up and -1 for down.

    units - the per spin biases in units of epsilon0, indexed by spin.
    """
    signs = _sign_matrix(len(units))
    exact = any(isinstance(u, Fraction) for u in units)
    if exact:
        return SandSDiagonal(np.array(
            [sum((int(s) * u for s, u in zip(row, units)), Fraction(0)) for row in signs],
            dtype=object,
        ))
    return SandSDiagonal(signs @ np.asarray(units, dtype=np.float64))


def sands_biases(diag: SandSDiagonal) -> tuple[Real, ...]:
    """
    The marginal biases, in units of epsilon0, of the state an S&S diagonal describes.
    Exact for any epsilon0 because the transform is affine.
    """
    n = diag.n
    signs = _sign_matrix(n)
    if not _is_exact(diag.values):
        return tuple(float(b) for b in (signs.T @ diag.values) * 2.0 ** -n)
    scale = Fraction(1, 1 << n)
    return tuple(sum(int(s) * v for s, v in zip(signs[:, i], diag.values)) * scale
                 for i in range(n))


def max_probability(state: DiagonalState) -> float:
    """ The largest basis state probability. """
    return float(np.max(state.probs))


def is_product_state(state: DiagonalState, epsilon0: Real, tol: float = 1e-6) -> bool:
    """
    Check whether a state is the tensor product of its marginals, comparing S&S entries.

    state - the state.
    epsilon0 - the S&S unit.
    tol - the per entry tolerance in units of epsilon0. Ignored for exact states.
    """
    prod = product_state(list(marginal_biases(state).biases))
    diff = np.abs(to_sands(state, epsilon0).values - to_sands(prod, epsilon0).values)
    if state.exact:
        return not any(diff)
    return bool(np.max(diff) <= tol)
