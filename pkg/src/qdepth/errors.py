"""Exception and warning types shared across the package."""


class QDepthError(Exception):
    """Base class for all package errors."""


class ConfigError(QDepthError, ValueError):
    """Malformed configuration or state description."""


class NumericalError(QDepthError):
    """A numerical diagnostic failed (truncation, coverage, convergence...)."""


class TruncationError(NumericalError, ValueError):
    """The Fock cutoff is too small for the requested state."""


class PoleError(NumericalError, ValueError):
    """The ordering parameter sits on (or beyond) a pole of the distribution."""


class GridCoverageError(NumericalError):
    """A quadrature grid does not contain the support of its integrand."""


class ConvergenceError(NumericalError):
    """An integral or iteration did not reach its stated tolerance."""


class ConsistencyError(NumericalError):
    """An internal identity (e.g. reality of W) was violated."""


class TruncationWarning(UserWarning):
    """Mass leaked through the Fock cutoff."""
