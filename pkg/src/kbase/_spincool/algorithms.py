"""
Schedulers that realize the cooling algorithms as step sequences on a simulation engine.

Spins are named right to left in the algorithm descriptions, A_1 being spin 0. The
Fibonacci family recursion F_k(j) cools A_j with spins A_j, ..., A_1:

    j == 2: RESET(A_2, A_1)
    j > 2:  repeat m_j times: (w)B-Comp(A_j, ..., A_(j-w+1)) where w = min(k, j - 1) + 1,
            then F_k(j - 1)

Fernandez is F_2 on three spins, Fibonacci is F_2, Tribonacci F_3 and all-bonacci F_(n-1).
"""

from collections import defaultdict
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
import logging
import math
from numbers import Real

import numpy as np

from kbase._spincool import logfields
from kbase._spincool.analysis import kstep_sequence
from kbase._spincool.backends import Backend, Engine, InitialState, make_engine
from kbase._spincool.core import Algorithm, Schedule, SpinSystem, TraceRecord
from kbase._spincool.exceptions import BackendMismatchError, ScheduleError, SpinSystemError
from kbase._spincool.leading_order import UpdateMode


_BCS = "BCS"
_PT = "PT"
_RESET = "RESET"
_SORT = "SORT"
_WAIT = "WAIT"
INIT = "INIT"


def comp_label(width: int) -> str:
    """ The trace label of a compression on the given number of spins. """
    return f"{width}B-Comp"


@dataclass
class RunResult:
    """
    The outcome of a scheduler run.
    """

    algorithm: Algorithm
    """ The algorithm that ran. """

    backend: Backend
    """ The backend that ran it. """

    system: SpinSystem
    """ The spin system. """

    schedule: Schedule
    """ The schedule that was run. """

    epsilon0: Real
    """ The epsilon0 the backend used. A Fraction for the rational backend. """

    target_spin: int
    """ The spin the algorithm cools. """

    records: list[TraceRecord]
    """ The trace. The first record is the initial state. """

    steps: int = 0
    """ The number of elementary steps executed. """

    converged: bool = True
    """ False if a step or repetition cap stopped the run. """

    level_reps: dict[int, int] = field(default_factory=dict)
    """
    The total number of repetitions run per recursion level, keyed by the number of spins
    the level works on.
    """

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def final_units(self) -> tuple[Real, ...]:
        """ The final biases in units of epsilon0, indexed by spin. """
        return self.final.bias_config.in_units(self.epsilon0)

    def target_units(self) -> Real:
        """ The final bias of the target spin in units of epsilon0. """
        return self.final_units()[self.target_spin]


class _StepBudgetExhausted(Exception):
    pass


class _Runner:
    """ Drives an engine, counting steps and recording the trace. """

    def __init__(
        self,
        engine: Engine,
        schedule: Schedule,
        top_level: int,
        limits: Sequence[Real] | None = None,
    ):
        self.engine = engine
        self.schedule = schedule
        self.top_level = top_level
        self.limits = limits
        self.steps = 0
        self.depth = 0
        self.converged = True
        self.level_reps = defaultdict(int)
        self.memo = {}
        self.memoizing = (
            engine.backend in (Backend.BIAS, Backend.EXACT)
            and schedule.reps is None
            and schedule.inner_reps is None
            and schedule.memoize
        )
        self._record_depth = schedule.effective_trace_depth
        self.records = [engine.snapshot(0, INIT)]

    def _recording(self, depth: int) -> bool:
        return self._record_depth is None or depth <= self._record_depth

    def _record(self, label: str):
        self.records.append(self.engine.snapshot(self.steps, label))

    def step(self, label: str, action: Callable, *args):
        if self.steps >= self.schedule.max_steps:
            raise _StepBudgetExhausted()
        action(*args)
        self.steps += 1
        if self._recording(self.depth):
            self._record(label)

    def sub_call(self, label: str, action: Callable, *args):
        self.depth += 1
        try:
            action(*args)
        finally:
            self.depth -= 1
        if self._recording(self.depth) and not self._recording(self.depth + 1):
            self._record(label)

    def _level_biases(self, top_spin: int) -> list[Real]:
        return [self.engine.bias(s) for s in range(top_spin + 1)]

    def reps_for(self, level: int, parent_rep: int) -> int | None:
        sched = self.schedule
        if sched.inner_reps:
            m = sched.inner_reps(level, parent_rep)
            if m is not None:
                return m
        if sched.reps is None:
            return None
        return sched.reps[self.top_level - level]

    def level_tolerance(self, top_spin: int) -> Real:
        """
        The largest distance from its limit the bias of a level's top spin may keep.

        An error left at spin s reaches the target scaled by at most limit(target) / limit(s).
        Each level gets an equal share of delta epsilon0 after that scaling.
        """
        tol = self.schedule.delta * self.engine.epsilon0
        if not self.limits:
            return tol
        levels = max(1, self.top_level - 2)
        return tol * self.limits[top_spin] / (self.limits[-1] * levels)

    def repeat(self, level: int, top_spin: int, body: Callable[[int], None], parent_rep: int = 0):
        """
        Run a level's repetitions: a fixed count in reps mode, otherwise until the biases of
        the level's spins, top_spin and below, are estimated to be within the level's
        tolerance of their limit.
        """
        m = self.reps_for(level, parent_rep)
        if m is not None:
            for i in range(m):
                self.level_reps[level] += 1
                body(i)
            return
        tol = self.level_tolerance(top_spin)
        prev = self._level_biases(top_spin)
        last_change = None
        for i in range(self.schedule.max_level_reps):
            self.level_reps[level] += 1
            body(i)
            cur = self._level_biases(top_spin)
            change = max(abs(c - p) for c, p in zip(cur, prev))
            if _distance_to_limit(change, last_change) < tol:
                return
            prev, last_change = cur, change
        logging.getLogger(__name__).warning(
            f"Level {level} did not converge in {self.schedule.max_level_reps} repetitions",
            extra={logfields.LEVEL: level, logfields.REPETITIONS: self.schedule.max_level_reps},
        )
        self.converged = False


def _distance_to_limit(change: Real, last_change: Real | None) -> Real:
    # geometric tail change r / (1 - r), r the ratio of the last two changes
    if change == 0 or last_change is None or change >= last_change:
        return change
    r = change / last_change
    return max(change, change * r / (1 - r))


def _check_schedule(schedule: Schedule, algorithm: Algorithm | tuple[Algorithm, ...]):
    expected = algorithm if isinstance(algorithm, tuple) else (algorithm,)
    if schedule.algorithm not in expected:
        raise ScheduleError(
            f"Expected a {'/'.join(a.value for a in expected)} schedule, "
            + f"got {schedule.algorithm.value}")


def _check_reps(schedule: Schedule, count: int):
    if schedule.reps is not None and len(schedule.reps) != count:
        raise ScheduleError(
            f"{schedule.algorithm.value} on this system takes {count} repetition counts, "
            + f"got {len(schedule.reps)}")


def _execute(
    schedule: Schedule,
    system: SpinSystem,
    engine: Engine,
    top_level: int,
    target_spin: int,
    body: Callable[[_Runner], None],
    limits: Sequence[Real] | None = None,
) -> RunResult:
    logr = logging.getLogger(__name__)
    alg = schedule.algorithm
    extra = {
        logfields.ALGORITHM: alg.value,
        logfields.BACKEND: engine.backend.value,
        logfields.SPINS: system.n,
    }
    logr.info(f"Running {alg.value} on {system.n} spins", extra=extra)
    run = _Runner(engine, schedule, top_level, limits)
    try:
        body(run)
    except _StepBudgetExhausted:
        logr.warning(
            f"Stopped {alg.value} after reaching the step cap of {schedule.max_steps}",
            extra=extra | {logfields.STEPS: run.steps},
        )
        run.converged = False
    if run.records[-1].step_index != run.steps:
        run._record(schedule.algorithm.value)
    result = RunResult(
        algorithm=alg,
        backend=engine.backend,
        system=system,
        schedule=schedule,
        epsilon0=engine.epsilon0,
        target_spin=target_spin,
        records=run.records,
        steps=run.steps,
        converged=run.converged,
        level_reps=dict(run.level_reps),
    )
    logr.info(
        f"Finished {alg.value} after {run.steps} steps",
        extra=extra | {
            logfields.STEPS: run.steps,
            logfields.TARGET_BIAS: float(result.target_units()),
        },
    )
    return result


def _engine(
    system: SpinSystem,
    backend: Backend | str,
    initial: InitialState | str | None,
    mode: UpdateMode | str,
    default_initial: InitialState = InitialState.RESET,
) -> Engine:
    return make_engine(backend, system, initial or default_initial, mode)


###
# The Fibonacci family
###


def _fib_level(run: _Runner, k: int, j: int, parent_rep: int):
    width = min(k, j - 1) + 1
    spins = tuple(range(j - 1, j - 1 - width, -1))
    label = comp_label(width)

    def repetition(i: int):
        run.step(label, run.engine.comp, spins)
        if j - 1 == 2:
            run.step(_RESET, run.engine.reset, (1, 0))
        else:
            run.sub_call(f"F{k}[{j - 1}]", _fib_sub_level, run, k, j - 1, i)

    run.repeat(j, j - 1, repetition, parent_rep)


def _fib_sub_level(run: _Runner, k: int, j: int, parent_rep: int):
    if not run.memoizing:
        _fib_level(run, k, j, parent_rep)
        return
    spins = tuple(range(j))
    key = (k, j)
    if key in run.memo:
        run.step(f"F{k}[{j}]", run.engine.restore, spins, run.memo[key])
        return
    _fib_level(run, k, j, parent_rep)
    run.memo[key] = run.engine.export(spins)


def _fib_family(
    system: SpinSystem,
    schedule: Schedule,
    k: int,
    backend: Backend | str,
    initial: InitialState | str | None,
    mode: UpdateMode | str,
) -> RunResult:
    n = system.n
    if not 2 <= k <= n - 1:
        raise ScheduleError(f"Compression width parameter k={k} requires 3 <= k + 1 <= n, n={n}")
    system.require_reset_spins((0, 1), schedule.algorithm.value)
    _check_reps(schedule, n - 2)
    engine = _engine(system, backend, initial, mode)
    return _execute(
        schedule,
        system,
        engine,
        n,
        n - 1,
        lambda run: _fib_level(run, k, n, 0),
        kstep_sequence(k, n),
    )


def fernandez(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Cool spin C of a three spin system C, B, A where B and A are reset spins: repeat
    3B-Comp(C, B, A) then RESET(B, A). The target reaches (1 - 2^-m) 2 epsilon0 after m
    repetitions.

    system - the spin system. Must have 3 spins with spins 0 and 1 as reset spins.
    schedule - the schedule. reps holds the single repetition count m; otherwise the
        repetitions run until convergence.
    backend - the backend to run on.
    initial - the starting state, by default reset spins thermal and C completely mixed.
    mode - the bias update form on the bias backend.
    """
    _check_schedule(schedule, Algorithm.FERNANDEZ)
    if system.n != 3:
        raise SpinSystemError(f"fernandez requires 3 spins, got {system.n}")
    return _fib_family(system, schedule, 2, backend, initial, mode)


def fernandez_reps(delta: float) -> int:
    """
    The number of fernandez repetitions that brings the target within delta of its limit
    of 2 epsilon0: 1 + ceil(log2(1 / delta)).
    """
    if not 0 < delta < 1:
        raise ScheduleError(f"delta must be in (0, 1), got {delta}")
    return 1 + math.ceil(math.log2(1 / delta))


def fibonacci(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run the Fibonacci algorithm, 3B-Comp at every level. Exhaustively the top spin reaches
    epsilon0 times the n-th Fibonacci number.

    See fernandez for the arguments. reps holds m_n, ..., m_3.
    """
    _check_schedule(schedule, Algorithm.FIBONACCI)
    if system.n < 3:
        raise SpinSystemError(f"fibonacci requires at least 3 spins, got {system.n}")
    return _fib_family(system, schedule, 2, backend, initial, mode)


def tribonacci(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run the Tribonacci algorithm, 4B-Comp at every level above the bottom one.
    """
    _check_schedule(schedule, Algorithm.TRIBONACCI)
    if system.n < 4:
        raise SpinSystemError(f"tribonacci requires at least 4 spins, got {system.n}")
    return _fib_family(system, schedule, 3, backend, initial, mode)


def kbonacci(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run the k-bonacci algorithm with (k+1)B-Comp, k taken from the schedule. Exhaustively the
    top spin reaches epsilon0 times the n-th k-step Fibonacci number.
    """
    _check_schedule(schedule, Algorithm.KBONACCI)
    schedule.validate(system.n)
    return _fib_family(system, schedule, schedule.k, backend, initial, mode)


def all_bonacci(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run k-bonacci with k = n - 1. Exhaustively the biases reach
    {2^(n-2), ..., 2, 1, 1} epsilon0.
    """
    _check_schedule(schedule, Algorithm.ALLBONACCI)
    if system.n < 3:
        raise SpinSystemError(f"all-bonacci requires at least 3 spins, got {system.n}")
    return _fib_family(system, schedule, system.n - 1, backend, initial, mode)


###
# Practicable algorithmic cooling
###


def pac1_spins(L: int) -> int:
    """ The number of spins PAC1 uses: 2L + 1 computation spins, each with a reset spin. """
    return 2 * (2 * L + 1)


def pac1_reset_spins(L: int) -> range:
    """ The reset spins of PAC1: reset spin r_i of computation spin c_i is spin 2L + i. """
    return range(2 * L + 1, pac1_spins(L))


def pac2_spins(L: int) -> int:
    """ The number of spins PAC2 uses: 2L + 1, spin 0 being the only reset spin. """
    return 2 * L + 1


def _pac_recursion(run: _Runner, L: int, initiate: Callable[[list[int]], None]):
    # c_i is spin i - 1
    def m(j: int, k: int):
        if j == 1:
            initiate([k, k - 1, k - 2])
        else:
            m(j - 1, k)
            m(j - 1, k - 1)
            m(j - 1, k - 2)
        run.step(comp_label(3), run.engine.comp, (k - 1, k - 2, k - 3))

    m(L, 2 * L + 1)


def pac1(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run PAC1: every computation spin has a dedicated reset spin whose polarization is
    transferred to it. M_j(k) runs M_(j-1) on c_k, c_(k-1), c_(k-2) then compresses them; at
    the bottom the three spins are initiated by polarization transfer. WAIT steps thermalize
    the used reset spins when one is needed again. The target c_(2L+1) reaches
    (3/2)^L epsilon0 to leading order.

    system - the spin system. Needs at least 2(2L + 1) spins with spins 2L + 1, ... as
        reset spins.
    schedule - the schedule, L taken from it.
    """
    _check_schedule(schedule, Algorithm.PAC1)
    schedule.validate(system.n)
    L = schedule.L
    if system.n < pac1_spins(L):
        raise SpinSystemError(f"pac1 with L={L} requires {pac1_spins(L)} spins, got {system.n}")
    system.require_reset_spins(pac1_reset_spins(L), "pac1")
    engine = _engine(system, backend, initial, mode)
    offset = 2 * L

    def body(run: _Runner):
        dirty = set()

        def initiate(ks: list[int]):
            needed = {offset + k for k in ks}
            if needed & dirty:
                run.step(_WAIT, engine.reset, tuple(sorted(dirty)))
                dirty.clear()

            def transfer():
                for k in ks:
                    engine.swap(offset + k, k - 1)
            run.step(_PT, transfer)
            dirty.update(needed)

        _pac_recursion(run, L, initiate)

    return _execute(schedule, system, engine, 2 * L + 1, 2 * L, body)


def pac2(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.BIAS,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run PAC2: spins form a nearest neighbour chain with the single reset spin c_1 (spin 0) at
    the end. Initiating c_k moves the reset spin's polarization up the chain with
    polarization transfers c_1 -> c_2 -> ... -> c_k, then resets c_1. The target c_(2L+1)
    reaches (3/2)^L epsilon0 to leading order.

    system - the spin system. Needs at least 2L + 1 spins with spin 0 a reset spin.
    schedule - the schedule, L taken from it.
    """
    _check_schedule(schedule, Algorithm.PAC2)
    schedule.validate(system.n)
    L = schedule.L
    if system.n < pac2_spins(L):
        raise SpinSystemError(f"pac2 with L={L} requires {pac2_spins(L)} spins, got {system.n}")
    system.require_reset_spins((0,), "pac2")
    engine = _engine(system, backend, initial, mode)

    def body(run: _Runner):
        def initiate(ks: list[int]):
            for k in ks:
                if k == 1:
                    continue
                for s in range(k - 1):
                    run.step(_PT, engine.swap, s, s + 1)
                run.step(_RESET, engine.reset, (0,))

        _pac_recursion(run, L, initiate)

    return _execute(schedule, system, engine, 2 * L + 1, 2 * L, body)


###
# Partner pairing and the basic compression subroutine
###


def ppa(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.EXACT,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run the partner pairing algorithm: alternate RESET of spin 0 with a SORT of the whole
    diagonal in decreasing order, until one round changes no S&S entry by delta or more, or
    the step cap is reached.

    system - the spin system. Spin 0 must be the only reset spin.
    schedule - the schedule. reps is not used.
    backend - exact or rational.
    initial - the starting state, by default completely mixed.
    """
    _check_schedule(schedule, Algorithm.PPA)
    if Backend(backend) == Backend.BIAS:
        raise BackendMismatchError("ppa requires the exact or rational backend")
    if system.reset_spins != frozenset((0,)):
        raise SpinSystemError(
            f"ppa requires spin 0 as the only reset spin, got {sorted(system.reset_spins)}")
    if schedule.reps is not None:
        raise ScheduleError("ppa does not take repetition counts")
    engine = _engine(system, backend, initial, mode, InitialState.MIXED)

    def body(run: _Runner):
        prev = engine.sands().values
        while True:
            run.level_reps[system.n] += 1
            run.step(_RESET, engine.reset, (0,))
            run.step(_SORT, engine.sort)
            cur = engine.sands().values
            if np.max(np.abs(cur - prev)) < schedule.delta:
                return
            prev = cur

    return _execute(schedule, system, engine, system.n, system.n - 1, body)


def bcs(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str = Backend.EXACT,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Repeat the basic compression subroutine on x = spin 0 and y = spin 1, relocating along
    spins 2, ..., n - 1, then RESET spins 1 and 0. On three spins this is fernandez with the
    compression realized by CNOT, NOT and CSWAP gates.

    system - the spin system. Needs at least 3 spins with spins 0 and 1 as reset spins.
    schedule - the schedule. reps holds the single repetition count.
    backend - the exact or rational backend, or the bias backend on exactly three spins.
    """
    _check_schedule(schedule, Algorithm.BCS)
    n = system.n
    if n < 3:
        raise SpinSystemError(f"bcs requires at least 3 spins, got {n}")
    if Backend(backend) == Backend.BIAS and n != 3:
        raise BackendMismatchError("bcs on the bias backend is limited to 3 spins")
    system.require_reset_spins((0, 1), "bcs")
    _check_reps(schedule, 1)
    engine = _engine(system, backend, initial, mode)
    chain = tuple(range(2, n))

    def body(run: _Runner):
        def repetition(i: int):
            run.step(_BCS, engine.bcs, 0, 1, chain)
            run.step(_RESET, engine.reset, (1, 0))
        run.repeat(n, n - 1, repetition)

    return _execute(schedule, system, engine, n, n - 1, body)


_SCHEDULERS = {
    Algorithm.FERNANDEZ: fernandez,
    Algorithm.FIBONACCI: fibonacci,
    Algorithm.TRIBONACCI: tribonacci,
    Algorithm.KBONACCI: kbonacci,
    Algorithm.ALLBONACCI: all_bonacci,
    Algorithm.PAC1: pac1,
    Algorithm.PAC2: pac2,
    Algorithm.PPA: ppa,
    Algorithm.BCS: bcs,
}


def default_reset_spins(algorithm: Algorithm, n: int, L: int | None = None) -> tuple[int, ...]:
    """ The reset spins an algorithm expects on an n spin system. """
    match algorithm:
        case Algorithm.PAC1:
            return tuple(pac1_reset_spins(L))
        case Algorithm.PAC2 | Algorithm.PPA:
            return (0,)
        case _:
            return (0, 1)


def default_spin_count(algorithm: Algorithm, L: int | None = None) -> int | None:
    """ The spin count implied by an algorithm's parameters, if any. """
    match algorithm:
        case Algorithm.FERNANDEZ:
            return 3
        case Algorithm.PAC1 if L is not None:
            return pac1_spins(L)
        case Algorithm.PAC2 if L is not None:
            return pac2_spins(L)
    return None


def run(
    system: SpinSystem,
    schedule: Schedule,
    *,
    backend: Backend | str | None = None,
    initial: InitialState | str | None = None,
    mode: UpdateMode | str = UpdateMode.APPROX,
) -> RunResult:
    """
    Run the schedule's algorithm.

    system - the spin system.
    schedule - the schedule.
    backend - the backend. Defaults to exact for ppa and bcs and bias otherwise.
    initial - the starting state. Defaults to completely mixed for ppa and to thermal reset
        spins with completely mixed computation spins otherwise.
    mode - the bias update form on the bias backend.
    """
    kwargs = {"initial": initial, "mode": mode}
    if backend is not None:
        kwargs["backend"] = backend
    return _SCHEDULERS[schedule.algorithm](system, schedule, **kwargs)
