"""Exception hierarchy shared by all modules."""


class TransTrajError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(TransTrajError, ValueError):
    """Shapes, dimensions or alpha tags do not agree."""


class DomainError(TransTrajError, ValueError):
    """A scalar argument lies outside its admissible range."""


class UnsupportedOperation(TransTrajError):
    """The requested operation needs data the object does not carry."""


class ConfigError(TransTrajError, ValueError):
    """A scenario or registry configuration is malformed."""


class DivergenceError(TransTrajError, ArithmeticError):
    """Time stepping produced a non-finite or runaway state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonconvergenceError(TransTrajError):
    """Newton iteration did not reach the requested tolerance."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegreeError(TransTrajError):
    """Base class for failures while computing a topological degree."""


class AdmissibilityError(DegreeError):
    """A zero lies on (or numerically too close to) the boundary."""


class DegeneracyError(DegreeError):
    """A located zero has a (numerically) singular Jacobian."""


class InconclusiveError(DegreeError):
    """No zero was found and the boundary values do not certify degree 0."""


class CoverageError(DegreeError):
    """Located zeros are not covered by the supplied sub-balls."""


class ContinuationStuck(TransTrajError):
    """Step size fell below the minimum before reaching lambda = 1."""

    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch if branch is not None else []
