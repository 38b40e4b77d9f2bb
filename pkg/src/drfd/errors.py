"""Exception hierarchy shared by all drfd modules."""


class DrfdError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(DrfdError, ValueError):
    pass


class NotPsd(InvalidInput):
    pass


class SingularInput(InvalidInput):
    pass


class SingularB(SingularInput):
    pass


class ZeroMatrix(InvalidInput):
    pass


class InsufficientData(InvalidInput):
    pass


class DegenerateCovariance(InvalidInput):
    pass


class ZeroWidthAxis(InvalidInput):
    pass


class InvalidAlpha(InvalidInput):
    pass


class InvalidBranch(DrfdError):
    pass


class InvalidProblem(InvalidInput):
    pass


class InvalidConfig(InvalidInput):
    pass


class InvalidDataset(InvalidInput):
    pass


class NotObservable(InvalidInput):
    pass


class NoParityVectors(InvalidInput):
    pass


class DegenerateFaultDirection(InvalidInput):
    pass


class SingularResidualCovariance(SingularInput):
    pass


class CalibrationFailed(DrfdError):
    pass


class SolverError(DrfdError):
    """Raised when a conic solve does not end with an optimal status."""

    def __init__(self, message, status=None, solution=None):
        super().__init__(message)
        self.status = status
        self.solution = solution


class DesignFailed(DrfdError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class InvariantViolation(DrfdError, AssertionError):
    """A certified quantity broke a contract it must satisfy."""
