"""Exception hierarchy shared across the library.

Every error raised by the public API derives from ``SeqsigError`` so callers
can catch library failures with a single handler.  The CLI maps the three
coarse categories to distinct exit codes: input problems (bad files, bad
shapes, bad configuration), capacity refusals, and numeric failures.
"""


class SeqsigError(Exception):
    """Base class for all library errors."""


class InputError(SeqsigError, ValueError):
    """Malformed or inconsistent user input (files, shapes, values)."""


class ConfigurationError(InputError):
    """An unknown or contradictory configuration option."""


class ShapeError(InputError):
    """Operands with incompatible dimensions or truncation levels."""


class DomainError(InputError):
    """A value outside the mathematical domain of an operation."""


class DegenerateDataError(InputError):
    """Data without enough variation to resolve a quantity (e.g. bandwidth)."""


class UnsupportedError(InputError):
    """A combination of options that is deliberately not implemented."""


class CapacityError(SeqsigError):
    """A computation that would exceed the configured size guards."""


class NumericError(SeqsigError):
    """Nonfinite values or other numerical breakdown during computation."""
