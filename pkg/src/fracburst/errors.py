"""Exception hierarchy shared by every module.

The CLI maps :class:`DomainError` and :class:`ConfigError` to exit code 1 and
:class:`NumericalFailure` to exit code 2.
"""


class FracburstError(Exception):
    """Base class for all package errors."""


class DomainError(FracburstError, ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class ConfigError(FracburstError, ValueError):
    """A configuration file or flag could not be parsed or validated."""


class ShapeError(DomainError):
    """A field has the wrong number of components or the wrong grid."""


class ResolutionError(FracburstError, RuntimeError):
    """A sampled profile is too coarse for the requested analysis."""


class NumericalFailure(FracburstError, RuntimeError):
    """NaN/Inf appeared where a finite value was required, or a solver stalled."""


class OutOfRangeWarning(UserWarning):
    """An operation was asked for something outside the resolvable range."""
