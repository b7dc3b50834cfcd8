"""Exception types raised across the package."""


class BlahutError(Exception):
    """Base class for all package errors."""


class InvalidDistribution(BlahutError, ValueError):
    """Vector is not (close enough to) a point on the probability simplex."""


class InvalidChannel(BlahutError, ValueError):
    """Matrix is not row-stochastic."""


class DimensionMismatch(BlahutError, ValueError):
    """Operand sizes do not agree."""


class AbsoluteContinuityViolation(BlahutError, ArithmeticError):
    """A divergence is infinite: p puts mass where q has none."""


class InsufficientData(BlahutError, ValueError):
    """Too few usable points for a fit."""


class DimensionGuard(BlahutError, ValueError):
    """Brute-force search refused because the input alphabet is too large."""


class ReferenceUnavailable(BlahutError, RuntimeError):
    """No reference optimum could be obtained at the requested precision."""
