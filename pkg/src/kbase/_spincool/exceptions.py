"""
Exceptions used by multiple modules.

Every exception raised for bad input is a ValueError so library callers can catch it without
knowing the simulator's exception hierarchy.
"""

from kbase._spincool.errors import ErrorType


class SpinCoolError(Exception):
    """ The root of the simulator's exceptions. """

    error_type: ErrorType = None


class ConfigError(SpinCoolError, ValueError):
    """ An error thrown when a run configuration is invalid. """

    error_type = ErrorType.INVALID_CONFIG


class ConfigNotFoundError(ConfigError, FileNotFoundError):
    """ An error thrown when a configuration file does not exist. """

    error_type = ErrorType.CONFIG_NOT_FOUND


class SpinSystemError(SpinCoolError, ValueError):
    """ An error thrown when a spin system is invalid for an operation. """

    error_type = ErrorType.INVALID_SPIN_SYSTEM


class SpinIndexError(SpinSystemError, IndexError):
    """ An error thrown when a spin index is out of range. """

    error_type = ErrorType.SPIN_INDEX_OUT_OF_RANGE


class GateOperandError(SpinCoolError, ValueError):
    """ An error thrown when gate operands collide or have the wrong arity. """

    error_type = ErrorType.INVALID_GATE_OPERANDS


class ResetSpinError(SpinCoolError, ValueError):
    """ An error thrown when a non-reset spin is reset. """

    error_type = ErrorType.NOT_A_RESET_SPIN


class BiasRangeError(SpinCoolError, ValueError):
    """ An error thrown when a bias lies outside [-1, 1]. """

    error_type = ErrorType.BIAS_OUT_OF_RANGE


class ScheduleError(SpinCoolError, ValueError):
    """ An error thrown when a schedule does not fit the spin system. """

    error_type = ErrorType.INVALID_SCHEDULE


class BackendMismatchError(SpinCoolError, ValueError):
    """ An error thrown when a backend cannot run an algorithm or gate. """

    error_type = ErrorType.BACKEND_MISMATCH


class BackendLimitError(SpinCoolError, ValueError):
    """ An error thrown when a spin system exceeds a backend's size cap. """

    error_type = ErrorType.BACKEND_LIMIT


class MismatchedSystemsError(SpinCoolError, ValueError):
    """ An error thrown when compared runs use different spin systems. """

    error_type = ErrorType.MISMATCHED_SYSTEMS


class InvariantViolationError(SpinCoolError):
    """ An error thrown when a state or trace breaks a numeric invariant. """

    error_type = ErrorType.INVARIANT_VIOLATION
