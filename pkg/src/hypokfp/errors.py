"""Exception types shared by every module; the CLI maps them to exit codes."""


class UsageError(ValueError):
    """Bad arguments or configuration (exit code 2)."""


class ToleranceError(RuntimeError):
    """A quadrature or integration routine could not reach its tolerance (exit code 3)."""


class InvariantViolation(AssertionError):
    """A checked mathematical invariant failed (exit code 1)."""


class UndefinedRatioError(ZeroDivisionError):
    """A ratio was requested with a zero denominator and a zero numerator."""
