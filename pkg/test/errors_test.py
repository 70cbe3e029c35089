from kbase._spincool.errors import ErrorType


def test_error_codes_are_unique():
    codes = [e.error_code for e in ErrorType]
    assert len(codes) == len(set(codes))


def test_error_type_fields():
    assert ErrorType.INVALID_CONFIG.error_code == 10000
    assert ErrorType.INVALID_CONFIG.error_type == "Invalid configuration"
    assert ErrorType.NOT_A_RESET_SPIN.error_code == 20030
    assert ErrorType.INVARIANT_VIOLATION.error_type == "Numeric invariant violated"
