"""Exception types raised across the package."""


class MSVError(Exception):
    """Base class for all package errors."""


class InvalidParameter(MSVError, ValueError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"invalid parameter '{field}'" + (f": {message}" if message else ""))


class CorrelationNotPD(MSVError, ValueError):
    pass


class NormalizationFailed(MSVError, ArithmeticError):
    pass


class NumericalOverflow(MSVError, ArithmeticError):
    pass


class StepCountTooSmall(MSVError, ArithmeticError):
    pass


class QuadratureNotConverged(MSVError, ArithmeticError):
    pass


class SourceNotCentered(MSVError, ValueError):
    pass


class InvalidState(MSVError, ArithmeticError):
    pass


class TruncationTooNarrow(MSVError, ArithmeticError):
    pass


class OutOfBounds(MSVError, ValueError):
    pass


class NoConvergence(MSVError, ArithmeticError):
    pass
