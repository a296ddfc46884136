"""Exception hierarchy.

``SolverError`` subclasses map to CLI exit code 3, ``FitError`` subclasses to
exit code 4.
"""


class NVMagError(Exception):
    """Base class for all package errors."""


class SolverError(NVMagError):
    pass


class NonSymmetric(SolverError, ValueError):
    pass


class DiscriminantViolation(SolverError, ValueError):
    pass


class InconsistentResonances(SolverError, ValueError):
    pass


class AngleOutOfRange(SolverError, ValueError):
    pass


class ZeroField(SolverError, ValueError):
    pass


class SplittingBelowStrain(SolverError, ValueError):
    pass


class WrongLineCount(SolverError, ValueError):
    pass


class SingularNormalMatrix(SolverError, ValueError):
    pass


class DuplicateLines(SolverError, ValueError):
    pass


class DegenerateInput(SolverError, ValueError):
    pass


class NotConverged(SolverError, RuntimeError):
    """Raised by iterative solvers; ``result`` carries the best iterate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class FitError(NVMagError):
    pass


class NoDipFound(FitError, ValueError):
    pass


class FitNotConverged(FitError, RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DomainError(NVMagError, ValueError):
    pass
