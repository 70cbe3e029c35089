"""
Map errors from exception type to custom error type and process exit code.
"""

from typing import NamedTuple

from kbase._spincool.errors import ErrorType
from kbase._spincool.exceptions import (
    InvariantViolationError,
    SpinCoolError,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class ErrorMapping(NamedTuple):
    """ The application error type and exit code for an exception. """
    err_type: ErrorType | None
    """ The type of application error. None if the error is unexpected. """
    exit_code: int
    """ The process exit code for the error. """


def map_error(err: Exception) -> ErrorMapping:
    """
    Map an error to an optional error type and an exit code.

    Invariant breaches exit with 3, every other simulator error is a configuration or
    validation problem and exits with 2. Unexpected errors and unwritable output exit with 1.
    """
    if isinstance(err, InvariantViolationError):
        return ErrorMapping(err.error_type, EXIT_INVARIANT)
    if isinstance(err, SpinCoolError):
        return ErrorMapping(err.error_type, EXIT_CONFIG)
    return ErrorMapping(None, EXIT_FAILURE)
