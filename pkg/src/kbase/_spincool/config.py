"""
Run configuration: loading TOML config files and merging them with command line values.
"""

from dataclasses import dataclass, replace
from enum import Enum
import math
from pathlib import Path
import tomllib
from typing import Any

from kbase._spincool.algorithms import default_reset_spins, default_spin_count
from kbase._spincool.backends import Backend, InitialState
from kbase._spincool.core import Algorithm, Mode, Schedule, SpinSystem
from kbase._spincool.exceptions import ConfigError, ConfigNotFoundError, SpinCoolError
from kbase._spincool.leading_order import UpdateMode


DEFAULT_EPSILON0 = 1e-6


class OutputFormat(Enum):
    """ Which trace files to write. """

    CSV = "csv"
    JSON = "json"
    BOTH = "both"


def load_config(config_path: Path) -> dict[str, Any]:
    """ Load a run configuration from a TOML file. """
    if not config_path.exists():
        raise ConfigNotFoundError(f"Config file not found: {config_path}")
    try:
        with open(config_path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {config_path}: {e}") from e


def parse_reps(reps: str | list[int] | tuple[int, ...] | int | None) -> tuple[int, ...] | None:
    """ Parse repetition counts given as a comma separated string or a list. """
    if reps is None:
        return None
    if isinstance(reps, int):
        return (reps,)
    if isinstance(reps, str):
        try:
            return tuple(int(r) for r in reps.split(",") if r.strip())
        except ValueError as e:
            raise ConfigError(f"Repetition counts must be integers: {reps!r}") from e
    return tuple(int(r) for r in reps)


def _enum(enum_type: type[Enum], value: Any, key: str) -> Enum | None:
    if value is None or isinstance(value, enum_type):
        return value
    try:
        return enum_type(str(value).lower())
    except ValueError:
        choices = ", ".join(e.value for e in enum_type)
        raise ConfigError(f"Invalid {key} {value!r}, expected one of {choices}") from None


_KEYS = {
    "alg", "n", "k", "L", "eps0", "eps", "backend", "mode", "reps", "delta", "max_steps",
    "out", "format", "initial", "trace_depth", "bias_update", "memoize",
}


@dataclass(frozen=True, kw_only=True)
class RunConfig:
    """
    A validated run configuration. Create with build.
    """

    alg: Algorithm
    """ The algorithm to run. """

    n: int
    """ The number of spins. """

    k: int | None = None
    """ The k-bonacci parameter. """

    L: int | None = None
    """ The number of PAC levels. """

    eps0: float = DEFAULT_EPSILON0
    """ The equilibrium bias. """

    eps: float | None = None
    """ The inverse temperature parameter, derived from eps0 if not given. """

    backend: Backend | None = None
    """ The backend. None selects the algorithm's default. """

    mode: Mode = Mode.EXHAUSTIVE
    """ How the recursion levels terminate. """

    reps: tuple[int, ...] | None = None
    """ The repetition counts for reps mode. """

    delta: float = 1e-6
    """ The exhaustive mode tolerance in units of epsilon0. """

    max_steps: int = 10_000_000
    """ The elementary step cap. """

    out: Path | None = None
    """ The output directory. """

    format: OutputFormat = OutputFormat.BOTH
    """ Which trace files to write. """

    initial: InitialState | None = None
    """ The starting state. None selects the algorithm's default. """

    trace_depth: int | None = None
    """ The deepest recorded recursion level. """

    bias_update: UpdateMode = UpdateMode.APPROX
    """ The bias update form on the bias backend. """

    memoize: bool = True
    """ Whether the bias and exact backends memoize converged sub-levels. """

    @classmethod
    def build(cls, file_values: dict[str, Any] | None = None, **overrides) -> "RunConfig":
        """
        Build a configuration from config file values and overrides, typically command line
        flags. Overrides that are None are ignored.

        file_values - the values loaded from a config file.
        overrides - values that take precedence over the file values.
        """
        values = dict(file_values or {})
        values.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(values) - _KEYS
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
        if "alg" not in values:
            raise ConfigError("An algorithm is required")
        alg = _enum(Algorithm, values["alg"], "algorithm")
        reps = parse_reps(values.get("reps"))
        mode = _enum(Mode, values.get("mode"), "mode")
        if mode is None:
            mode = Mode.EXHAUSTIVE if reps is None else Mode.REPS
        if mode == Mode.REPS and reps is None and alg != Algorithm.PPA:
            raise ConfigError("reps mode requires repetition counts")
        if mode == Mode.EXHAUSTIVE and reps is not None:
            raise ConfigError("Repetition counts cannot be used in exhaustive mode")
        L = values.get("L")
        n = values.get("n") or default_spin_count(alg, L)
        if n is None:
            raise ConfigError(f"{alg.value} requires the number of spins")
        eps0, eps = _epsilons(values.get("eps0"), values.get("eps"))
        out = values.get("out")
        try:
            return cls(
                alg=alg,
                n=int(n),
                k=values.get("k"),
                L=L,
                eps0=eps0,
                eps=eps,
                backend=_enum(Backend, values.get("backend"), "backend"),
                mode=mode,
                reps=reps,
                delta=float(values.get("delta", 1e-6)),
                max_steps=int(values.get("max_steps", 10_000_000)),
                out=Path(out) if out is not None else None,
                format=_enum(OutputFormat, values.get("format", "both"), "format"),
                initial=_enum(InitialState, values.get("initial"), "initial state"),
                trace_depth=values.get("trace_depth"),
                bias_update=_enum(UpdateMode, values.get("bias_update", "approx"), "bias update"),
                memoize=bool(values.get("memoize", True)),
            )._validated()
        except (TypeError, ValueError) as e:
            if isinstance(e, SpinCoolError):
                raise
            raise ConfigError(f"Invalid configuration value: {e}") from e

    def _validated(self) -> "RunConfig":
        try:
            self.schedule().validate(self.n)
            self.system()
        except SpinCoolError as e:
            raise ConfigError(str(e)) from e
        return self

    def system(self) -> SpinSystem:
        """ The spin system the configuration describes. """
        return SpinSystem(
            n=self.n,
            reset_spins=frozenset(default_reset_spins(self.alg, self.n, self.L)),
            epsilon0=self.eps0,
            epsilon=self.eps,
        )

    def schedule(self) -> Schedule:
        """ The schedule the configuration describes. """
        return Schedule(
            algorithm=self.alg,
            k=self.k,
            L=self.L,
            reps=self.reps if self.mode == Mode.REPS else None,
            delta=self.delta,
            max_steps=self.max_steps,
            trace_depth=self.trace_depth,
            memoize=self.memoize,
        )

    def with_system(self, n: int, eps0: float) -> "RunConfig":
        """ A copy of the configuration for another spin count and epsilon0. """
        if not 0 < eps0 < 1:
            raise ConfigError(f"eps0 must be in (0, 1), got {eps0}")
        return replace(self, n=n, eps0=eps0, eps=math.atanh(eps0))._validated()

    def with_output(self, out: Path) -> "RunConfig":
        """ A copy of the configuration writing to another directory. """
        return replace(self, out=out)

    def as_dict(self) -> dict[str, Any]:
        """ The configuration as plain values, for reports. """
        return {
            "alg": self.alg.value,
            "n": self.n,
            "k": self.k,
            "L": self.L,
            "eps0": self.eps0,
            "eps": self.eps,
            "backend": self.backend.value if self.backend else None,
            "mode": self.mode.value,
            "reps": list(self.reps) if self.reps is not None else None,
            "delta": self.delta,
            "max_steps": self.max_steps,
            "initial": self.initial.value if self.initial else None,
            "trace_depth": self.trace_depth,
            "bias_update": self.bias_update.value,
        }


def _epsilons(eps0: float | None, eps: float | None) -> tuple[float, float]:
    if eps0 is None and eps is None:
        eps0 = DEFAULT_EPSILON0
    try:
        if eps is None:
            if not 0 < float(eps0) < 1:
                raise ConfigError(f"eps0 must be in (0, 1), got {eps0}")
            return float(eps0), math.atanh(float(eps0))
        eps = float(eps)
        if eps0 is None:
            return math.tanh(eps), eps
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid eps0 or eps: {e}") from e
    if not math.isclose(math.tanh(eps), float(eps0), rel_tol=1e-15):
        raise ConfigError(f"eps0 {eps0} is not tanh(eps) for eps {eps}")
    return float(eps0), eps
