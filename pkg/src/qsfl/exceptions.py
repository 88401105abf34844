"""Exception hierarchy for qsfl."""

from sklearn.exceptions import NotFittedError


class QsflError(Exception):
    """Base class for all library errors."""


class DomainError(QsflError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NonConvergence(QsflError, ArithmeticError):
    """Iterative evaluation did not reach the requested tolerance."""


class ConfigError(QsflError, ValueError):
    """Invalid source model or system configuration."""


class CapExceeded(QsflError):
    """Exhaustive frame enumeration would exceed the configured cap.

    Callers should fall back to Monte Carlo sampling of frames.
    """


class EmptyFrame(QsflError, ValueError):
    """Water-filling requested on a frame with no blocks."""


class UnsolvedLambda(QsflError, NotFittedError):
    """A policy query was made before the power multiplier was solved."""


class BracketingFailure(QsflError):
    """No sign change of the power-constraint residual was found."""


class RateOverBuffer(QsflError, ValueError):
    """Fixed channel rate violates the buffer constraint b*R <= B_max."""


class QuadratureFailure(QsflError):
    """Adaptive quadrature could not reach its tolerance."""


class MissingFit(QsflError):
    """A power-gain formula needs a multiplexing-gain fit that was not supplied."""


class Unachievable(QsflError):
    """Requested RSNR lies above a scheme's saturation cap."""
