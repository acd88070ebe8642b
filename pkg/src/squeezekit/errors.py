"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific one that applies.
"""


class SqueezekitError(Exception):
    """Base class for all package errors."""


class ConfigError(SqueezekitError):
    """Bad or unknown configuration input (CLI exit code 2)."""


class NoSolutionError(SqueezekitError):
    """A parameter search found nothing within its bounds (CLI exit code 3)."""


class NumericalError(SqueezekitError):
    """A numerical contract was violated: fit residual too large,
    ill-conditioned root extraction, non-convergence (CLI exit code 4).

    The optional ``best`` attribute carries the best iterate available
    when an iterative routine gives up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SignalNullError(SqueezekitError):
    """Homodyne vector is orthogonal to the signal response."""


class ApproximationWarning(UserWarning):
    """A second-order expansion was evaluated outside its validity regime."""
