class ConstrainedRiskError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ConstrainedRiskError, ValueError):
    pass


class ConfigError(ConstrainedRiskError, ValueError):
    pass


class NumericError(ConstrainedRiskError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class AbsoluteContinuityError(NumericError):
    """P1 puts mass where P0 has (numerically) none."""


class InfeasibleError(ConstrainedRiskError, ValueError):
    pass
