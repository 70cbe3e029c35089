"""
Fixed point and bound analysis: sequence oracles, limit configurations, PPA invariance
checks, entropies and the cooling bounds.
"""

from collections.abc import Sequence
from fractions import Fraction
import math
from numbers import Real
from typing import NamedTuple

import numpy as np

from kbase._spincool import gates
from kbase._spincool.core import (
    Algorithm,
    DiagonalState,
    SandSDiagonal,
    from_sands,
    linear_sands,
    sands_biases,
    to_sands,
)
from kbase._spincool.exceptions import ScheduleError


def kstep_sequence(k: int, n: int) -> list[int]:
    """
    The first n terms of the k-step Fibonacci sequence: a_1 = a_2 = 1 and each later term is
    the sum of the up to k terms before it.

    k - the number of summed terms, k >= 2.
    n - the number of terms.
    """
    if k < 2:
        raise ScheduleError(f"k must be at least 2, got {k}")
    seq = []
    for i in range(n):
        seq.append(1 if i < 2 else sum(seq[max(0, i - k):i]))
    return seq


def limit_configuration(algorithm: Algorithm, n: int, k: int | None = None) -> list[int]:
    """
    The exhaustive limit biases of a Fibonacci family algorithm in units of epsilon0,
    indexed by spin.

    algorithm - one of fernandez, fibonacci, tribonacci, kbonacci, allbonacci or ppa. The PPA
        limit is taken to be the all-bonacci limit.
    n - the number of spins.
    k - the k-bonacci parameter.
    """
    match algorithm:
        case Algorithm.FERNANDEZ | Algorithm.FIBONACCI:
            k = 2
        case Algorithm.TRIBONACCI:
            k = 3
        case Algorithm.ALLBONACCI | Algorithm.PPA:
            k = max(2, n - 1)
        case Algorithm.KBONACCI:
            if k is None:
                raise ScheduleError("kbonacci requires k")
        case _:
            raise ScheduleError(f"{algorithm.value} has no fixed point configuration")
    return kstep_sequence(k, n)


def expected_target_units(
    algorithm: Algorithm, n: int, k: int | None = None, L: int | None = None
) -> float:
    """
    The leading order target bias of an algorithm in units of epsilon0 when run
    exhaustively, or for PAC, after its L levels.
    """
    match algorithm:
        case Algorithm.PAC1 | Algorithm.PAC2:
            return 1.5 ** L
        case Algorithm.BCS:
            return 2.0 if n == 3 else math.nan
    return float(limit_configuration(algorithm, n, k)[-1])


def fixed_point_residuals(units: Sequence[Real], k: int) -> list[float]:
    """
    How far a bias configuration is from the k-bonacci fixed point equations
    e_j = e_(j-1) + ... + e_(j-k). Returns one relative residual per spin from spin 2 up.

    units - the biases indexed by spin.
    k - the k-bonacci parameter.
    """
    res = []
    for j in range(2, len(units)):
        expected = sum(units[max(0, j - k):j])
        res.append(float(abs(units[j] - expected) / abs(expected)) if expected else math.inf)
    return res


def allbonacci_limit_diagonal(n: int) -> SandSDiagonal:
    """
    The leading order S&S diagonal of the all-bonacci limit {2^(n-2), ..., 2, 1, 1} epsilon0.
    """
    if n < 3:
        raise ScheduleError(f"all-bonacci requires at least 3 spins, got {n}")
    units = limit_configuration(Algorithm.ALLBONACCI, n)
    return SandSDiagonal(np.array([Fraction(v) for v in linear_sands(units).values], dtype=object))


def ppa_round(diag: SandSDiagonal) -> SandSDiagonal:
    """ One PPA round, RESET of spin 0 then SORT, on an S&S diagonal to leading order. """
    after = gates.reset_sands(diag, 0)
    return SandSDiagonal(gates.descending_order(after.values)[0])


def ppa_round_exact(state: DiagonalState, epsilon0: Real) -> DiagonalState:
    """ One PPA round, RESET of spin 0 then SORT, on a probability vector. """
    return gates.sort_step(gates.reset(state, 0, epsilon0))[0]


class InvarianceReport(NamedTuple):
    """ The result of applying one PPA round to a diagonal. """

    after: SandSDiagonal
    """ The diagonal after the round, to leading order in epsilon0. """

    max_drift: Real
    """ The largest change of any S&S entry in the leading order round. """

    exact_max_drift: float
    """ The largest change of any S&S entry in a float round at the given epsilon0. """

    top_bias_change: Real
    """ The change of the top spin's bias in units of epsilon0 in the leading order round. """

    invariant: bool
    """ Whether max_drift is within the tolerance. """


def _exact_values(diag: SandSDiagonal) -> np.ndarray:
    if diag.values.dtype == object:
        return diag.values
    return np.array([Fraction(float(v)) for v in diag.values], dtype=object)


def check_ppa_invariance(
    diag: SandSDiagonal, epsilon0: float = 1e-6, tol: float = 1e-10
) -> InvarianceReport:
    """
    Apply one PPA round to an S&S diagonal and report how much it moved.

    The leading order round uses exact Fractions, so the all-bonacci limit shows zero drift.
    The float round on the probabilities at epsilon0 is reported alongside; its drift is of
    order epsilon0 2^n.

    diag - the S&S diagonal.
    epsilon0 - the S&S unit for the float round.
    tol - the largest leading order drift still counted as invariant.
    """
    exact = SandSDiagonal(_exact_values(diag))
    after = ppa_round(exact)
    drift = max(abs(a - b) for a, b in zip(after.values, exact.values))
    state = from_sands(SandSDiagonal(exact.values.astype(np.float64)), epsilon0)
    moved = to_sands(ppa_round_exact(state, epsilon0), epsilon0)
    exact_drift = float(np.max(np.abs(moved.values - exact.values.astype(np.float64))))
    top = exact.n - 1
    top_change = sands_biases(after)[top] - sands_biases(exact)[top]
    return InvarianceReport(
        after=after,
        max_drift=drift,
        exact_max_drift=exact_drift,
        top_bias_change=top_change,
        invariant=drift <= tol,
    )


def spin_entropy(bias: Real) -> float:
    """ The Shannon entropy in bits of one spin with the given bias. """
    p = np.array([(1 + float(bias)) / 2, (1 - float(bias)) / 2])
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_entropy(state: DiagonalState) -> float:
    """ The Shannon entropy in bits of a probability vector. """
    p = state.probs.astype(np.float64)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_bound(n: int, epsilon0: Real) -> float:
    """
    The largest bias entropy conserving compression of n spins at epsilon0 can reach, to
    leading order: epsilon0 sqrt(n).
    """
    if n < 1:
        raise ScheduleError(f"n must be at least 1, got {n}")
    return float(epsilon0) * math.sqrt(n)


class ProbabilityBound(NamedTuple):
    """ Upper bounds on any basis state probability under algorithmic cooling. """

    bound: float
    """ min{2^-n e^(2^n epsilon), 1}. """

    claimed: float | None
    """ The tighter claimed bound 2^-n e^(2^(n-1) epsilon), if requested. """


def _bound(n: int, exponent: float) -> float:
    log_bound = exponent - n * math.log(2)
    return 1.0 if log_bound >= 0 else math.exp(log_bound)


def probability_bound(n: int, epsilon: float, strict: bool = False) -> ProbabilityBound:
    """
    Bound the probability of any basis state of n spins cooled with a bath at inverse
    temperature parameter epsilon.

    n - the number of spins.
    epsilon - the inverse temperature parameter, epsilon0 = tanh(epsilon).
    strict - also compute the tighter claimed bound, which is a conjecture.
    """
    if n < 1:
        raise ScheduleError(f"n must be at least 1, got {n}")
    return ProbabilityBound(
        bound=_bound(n, 2 ** n * epsilon),
        claimed=_bound(n, 2 ** (n - 1) * epsilon) if strict else None,
    )
