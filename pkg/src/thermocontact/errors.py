"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ThermoContactError(Exception):
    """Base class for all package errors."""


class DomainViolation(ThermoContactError, ValueError):
    """Argument lies outside the effective domain of a thermal law."""


class NoConvergence(ThermoContactError, RuntimeError):
    """An iterative solve exhausted its iteration budget."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class NewtonNoConvergence(NoConvergence):
    pass


class ActiveSetNoConvergence(NoConvergence):
    pass


class FixedPointNoConvergence(NoConvergence):
    pass


class LinearSolveFailure(ThermoContactError, RuntimeError):
    pass


class InvalidExtents(ThermoContactError, ValueError):
    pass


class EmptyRequiredPart(ThermoContactError, ValueError):
    pass


class DegenerateCell(ThermoContactError, ValueError):
    pass


class EllipticityViolation(ThermoContactError, ValueError):
    pass


class ConfigError(ThermoContactError, ValueError):
    """Base for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


class ValidationError(ConfigError):
    pass
