"""Exception hierarchy. The CLI maps ValidationError to exit 2 and NumericalError to exit 3."""


class XFHedgeError(Exception):
    pass


class ValidationError(XFHedgeError, ValueError):
    """Bad input: malformed config, out-of-range losses, unverified network, ..."""


class NumericalError(XFHedgeError, ArithmeticError):
    pass


class InfeasibleConstraintError(NumericalError):
    pass


class RootFindingError(NumericalError):
    pass


class ProjectionError(NumericalError):
    """Cyclic projection failed to reach the requested residual."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
