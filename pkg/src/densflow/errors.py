"""Exception types shared across the package."""


class DensflowError(Exception):
    """Base class for all densflow-specific errors."""


class DomainError(DensflowError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(DensflowError, ValueError):
    """A requested value lies outside the range covered by a profile or table."""


class ConfigError(DensflowError):
    """Invalid or inconsistent run configuration."""


class ParseError(ConfigError):
    """Malformed config or data file; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class RegimeError(DensflowError):
    """A regime hypothesis (e.g. monotone propagation function) fails."""


class InconclusiveError(DensflowError):
    """The data do not allow a decision (e.g. tail exponent not estimable)."""


class StabilityError(DensflowError):
    """The explicit scheme could not produce an admissible step."""


class DegenerateInputError(DensflowError):
    """Input is degenerate for the requested operation (e.g. zero function)."""


class HypothesisError(DensflowError):
    """A theorem hypothesis required by an experiment does not hold."""


class BranchError(DensflowError):
    """Only the trivial branch of a singular initial value problem exists."""


class InsufficientDataError(DensflowError):
    """Too few usable samples for a fit or audit."""
