"""Exception hierarchy shared by every dislag module."""


class DislagError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DislagError, ValueError):
    """Invalid problem or run configuration."""


class SlaterViolation(ConfigurationError):
    """Total resource is not strictly inside the sum of the boxes."""


class BracketFailure(DislagError):
    """The dual bisection could not find a sign change of the subgradient."""


class ScheduleExhausted(DislagError):
    """A run asked for a graph past the end of its schedule."""


class DeltaOutOfRange(DislagError, ValueError):
    """Spectral parameter outside [0, 1)."""


class ParseError(DislagError, ValueError):
    """Malformed case, schedule or trace file."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class InvariantViolation(DislagError, ValueError):
    """A parsed file is well formed but breaks a data invariant."""
