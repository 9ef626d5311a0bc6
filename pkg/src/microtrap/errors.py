"""Exception hierarchy.

Domain/range/shape problems derive from ``ValueError``; failures of a
numerical procedure derive from :class:`NumericError`.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NotAdiabaticError(DomainError):
    """Transport time is at or below the pole of the heating envelope."""


class RangeError(ValueError):
    """A requested displacement exceeds what the actuator can reach."""

    def __init__(self, message, max_reachable=None):
        super().__init__(message)
        self.max_reachable = max_reachable


class DimensionError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


class SiteIndexError(IndexError):
    pass


class NumericError(ArithmeticError):
    pass


class BracketError(NumericError):
    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class FitError(NumericError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Scenario file could not be parsed or validated.

    ``location`` names the offending field (dotted path) or line.
    """

    def __init__(self, message, location=None):
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location
