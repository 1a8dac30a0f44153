class ShlabError(Exception):
    """Base class for all errors raised by shlab."""


class DomainError(ShlabError, ValueError):
    pass


class SingularityError(ShlabError, ValueError):
    """Potential evaluated on its singular set (origin or boundary)."""


class UnsupportedDomainError(ShlabError, NotImplementedError):
    """Solver asked to work on a non-ball gauge."""


class GridError(ShlabError, ValueError):
    pass


class PreconditionError(ShlabError, ValueError):
    pass


class NotPositiveDefinite(ShlabError, ArithmeticError):
    """A tridiagonal LDL^T factorization met a nonpositive pivot."""

    def __init__(self, index, pivot):
        super().__init__(f"nonpositive pivot {pivot!r} at row {index}")
        self.index = index
        self.pivot = pivot


class EigenSolverError(ShlabError, ArithmeticError):
    """Inverse iteration did not reach the requested residual.

    The last iterate, eigenvalue estimate and residual are attached so that
    callers can inspect how far the solve got.
    """

    def __init__(self, message, vector=None, value=None, residual=None):
        super().__init__(message)
        self.vector = vector
        self.value = value
        self.residual = residual


class TimeStepError(ShlabError, ArithmeticError):
    pass


class ConfigError(ShlabError, ValueError):
    pass
