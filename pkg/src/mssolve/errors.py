"""Exception hierarchy shared by the solver modules."""


class MSSolveError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(MSSolveError, ValueError):
    """Input data violates a documented invariant."""


class SolverError(MSSolveError, RuntimeError):
    """A numerical solve could not be completed."""


class SeparationViolation(ValidationError):
    pass


class NonPositiveRadius(ValidationError):
    pass


class OutsideTubularNeighborhood(ValidationError):
    pass


class InsufficientTimeSamples(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class CompatibilityViolated(ValidationError):
    pass


class CoercivityViolated(ValidationError):
    pass


class NonCircularGeometry(ValidationError):
    pass


class BackendResolutionTooLow(SolverError):
    pass


class SingularForm(SolverError):
    pass


class PowerIterationStall(SolverError):
    pass


class ImplicitSolveFailed(SolverError):
    pass


class StepsizeTooLarge(SolverError):
    pass


class ExtrapolationDisagreement(SolverError):
    pass


class ParseError(MSSolveError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.line = line
        self.field = field
