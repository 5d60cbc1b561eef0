"""Exception hierarchy shared by all modules."""


class OptDiscrimError(Exception):
    """Base class for every error raised by optdiscrim."""


class NotHermitian(OptDiscrimError):
    pass


class DomainError(OptDiscrimError):
    pass


class DimensionMismatch(OptDiscrimError):
    pass


class SystemMismatch(OptDiscrimError):
    pass


class UnsupportedSystem(OptDiscrimError):
    pass


class UnsupportedModel(OptDiscrimError):
    pass


class TooLarge(OptDiscrimError):
    pass


class NoConvergence(OptDiscrimError):
    """Iteration budget exhausted; ``report`` holds the best point found."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotCovariant(OptDiscrimError):
    pass


class InvalidSetup(OptDiscrimError):
    pass


class PreconditionFailed(OptDiscrimError):
    pass


class UnsupportedWiring(OptDiscrimError):
    pass


class ClassMismatch(OptDiscrimError):
    pass


class UnknownScenario(OptDiscrimError):
    pass


class ParseError(OptDiscrimError):
    """Malformed instance file. ``line`` and ``field`` locate the problem."""

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field = field


class ValidationError(OptDiscrimError):
    """Instance parsed but violates a named invariant."""

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant
