"""
Error codes for exceptions thrown by the spin cooling simulator.
"""

from enum import Enum


class ErrorType(Enum):
    """
    The type of an error, consisting of an error code and a brief string describing the type.
    :ivar error_code: an integer error code.
    :ivar error_type: a brief string describing the error type.
    """

    INVALID_CONFIG =             (10000, "Invalid configuration")
    """ A general run configuration error. """

    CONFIG_NOT_FOUND =           (10010, "Configuration file not found")
    """ The configuration file does not exist. """

    INVALID_SPIN_SYSTEM =        (20000, "Invalid spin system")
    """ The spin system is not valid for the requested operation. """

    SPIN_INDEX_OUT_OF_RANGE =    (20010, "Spin index out of range")
    """ A spin index is outside the spin system. """

    INVALID_GATE_OPERANDS =      (20020, "Invalid gate operands")
    """ The operands of a gate are duplicated, out of range, or of the wrong arity. """

    NOT_A_RESET_SPIN =           (20030, "Not a reset spin")
    """ A reset was requested on a spin that is not designated as a reset spin. """

    BIAS_OUT_OF_RANGE =          (20040, "Bias out of range")
    """ A polarization bias is outside [-1, 1]. """

    INVALID_SCHEDULE =           (30000, "Invalid schedule")
    """ The algorithm schedule is not valid for the spin system. """

    BACKEND_MISMATCH =           (30010, "Backend does not support the operation")
    """ The selected backend cannot run the requested algorithm or gate. """

    BACKEND_LIMIT =              (30020, "Spin system too large for backend")
    """ The spin system exceeds the size cap of the selected backend. """

    MISMATCHED_SYSTEMS =         (30030, "Mismatched spin systems")
    """ Two runs to be compared do not share a spin system. """

    INVARIANT_VIOLATION =        (40000, "Numeric invariant violated")
    """ A state or trace breaks one of the simulator's numeric invariants. """

    def __init__(self, error_code, error_type):
        self.error_code = error_code
        self.error_type = error_type
