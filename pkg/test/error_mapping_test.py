from kbase._spincool.error_mapping import (
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_INVARIANT,
    ErrorMapping,
    map_error,
)
from kbase._spincool.errors import ErrorType
from kbase._spincool.exceptions import (
    BackendLimitError,
    ConfigNotFoundError,
    InvariantViolationError,
    ScheduleError,
)


def test_map_error():
    assert map_error(ScheduleError("x")) == ErrorMapping(ErrorType.INVALID_SCHEDULE, EXIT_CONFIG)
    assert map_error(BackendLimitError("x")) == ErrorMapping(ErrorType.BACKEND_LIMIT, EXIT_CONFIG)
    assert map_error(ConfigNotFoundError("x")) == ErrorMapping(
        ErrorType.CONFIG_NOT_FOUND, EXIT_CONFIG)
    assert map_error(InvariantViolationError("x")) == ErrorMapping(
        ErrorType.INVARIANT_VIOLATION, EXIT_INVARIANT)


def test_map_unexpected_error():
    assert map_error(FileNotFoundError("x")) == ErrorMapping(None, EXIT_FAILURE)
    assert map_error(PermissionError("x")) == ErrorMapping(None, EXIT_FAILURE)
    assert map_error(KeyError("x")) == ErrorMapping(None, EXIT_FAILURE)
