"""Exception hierarchy.

Every error carries a stable ``code`` string so the CLI and the experiment
harness can report failures without matching on message text.
"""


class FgdError(Exception):
    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class InvalidParameter(FgdError, ValueError):
    code = "INVALID_PARAMETER"


class InvalidHurst(InvalidParameter):
    code = "INVALID_H"


class NegativeEigenvalue(FgdError, ArithmeticError):
    code = "NEGATIVE_EIGENVALUE"


class OracleTooLarge(InvalidParameter):
    code = "ORACLE_TOO_LARGE"


class FactorizationFailed(FgdError, ArithmeticError):
    code = "FACTORIZATION_FAILED"


class GridMismatch(InvalidParameter):
    code = "GRID_MISMATCH"


class ExponentOverflow(FgdError, OverflowError):
    code = "OVERFLOW"


class NonpositiveState(FgdError, ArithmeticError):
    code = "NONPOSITIVE_STATE"


class NotADivisor(InvalidParameter):
    code = "NOT_A_DIVISOR"


class PathTooShort(InvalidParameter):
    code = "PATH_TOO_SHORT"


class IndexOutOfRange(InvalidParameter, IndexError):
    code = "INDEX_OUT_OF_RANGE"


class ZeroVariation(FgdError, ArithmeticError):
    code = "ZERO_VARIATION"


class DegenerateSchedule(InvalidParameter):
    code = "DEGENERATE_SCHEDULE"


class TooFewSamples(InvalidParameter):
    code = "TOO_FEW_SAMPLES"


class SpecError(InvalidParameter):
    """Malformed experiment specification; ``field`` names the offending key."""

    code = "SPEC_ERROR"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
