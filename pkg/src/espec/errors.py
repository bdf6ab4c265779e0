"""Exception hierarchy shared by all espec modules."""


class EspecError(Exception):
    """Base class for every error raised by espec."""


class EllipticityViolation(EspecError, ValueError):
    pass


class SpecOutOfDomain(EspecError, ValueError):
    pass


class DimensionMismatch(EspecError, ValueError):
    pass


class GridMismatch(EspecError, ValueError):
    pass


class KindMismatch(EspecError, TypeError):
    pass


class AllocationTooLarge(EspecError, MemoryError):
    pass


class SolverError(EspecError, RuntimeError):
    """Base for failures inside the eigensolvers."""


class NoConvergence(SolverError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"iteration limit exceeded at index {index}")


class FactorizationSingular(SolverError):
    def __init__(self, shift, message=None):
        self.shift = shift
        super().__init__(message or f"A - shift*I is singular for shift={shift!r}")


class InadmissibleGamma(EspecError, ValueError):
    pass


class HypothesisViolated(EspecError, ValueError):
    pass


class RootNotBracketed(EspecError, ValueError):
    pass


class ZeroMoment(EspecError, ValueError):
    pass


class EmptyFamily(EspecError, ValueError):
    pass


class ConfigParseError(EspecError, ValueError):
    """Raised for malformed scenario files; carries the offending field or line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ScenarioFailed(EspecError):
    """A module error raised while executing a named scenario."""

    def __init__(self, scenario, cause):
        self.scenario = scenario
        self.cause = cause
        super().__init__(f"scenario '{scenario}': {type(cause).__name__}: {cause}")
