"""Semantic exception hierarchy.

Every error raised by this package derives from :class:`EotError`. Input
problems that can be detected before any numerics run derive from
:class:`ValidationError` (the CLI maps those to exit code 2).
"""


class EotError(Exception):
    """Base class for all package errors."""


class ValidationError(EotError, ValueError):
    """Invalid input data or configuration."""


class EmptySupport(ValidationError):
    """A measure was given zero atoms."""


class NonpositiveWeight(ValidationError):
    """A measure weight is zero, negative, or not finite."""


class WeightSumOutOfRange(ValidationError):
    """Weights do not sum to 1 within the input tolerance."""


class DimensionMismatch(ValidationError):
    """Array shapes or point dimensions are inconsistent."""


class NegativeCost(ValidationError):
    """A cost value is negative or NaN."""


class AssumptionViolated(ValidationError):
    """A conditional cost average is infinite, so the uniform bound K does not exist."""


class AllTermsVanish(ValidationError):
    """Every term of a log-domain reduction is zero (an all-infinite cost slice)."""


class TooLarge(ValidationError):
    """Instance exceeds the dense desk-scale limits."""


class Overflow(EotError):
    """An exponential sum exceeded the floating-point range."""


class NotATransformPair(EotError):
    """The supplied pair is not a potential together with its transform."""


class NegativeDualValue(EotError):
    """Normalization requires a nonnegative dual value to start from."""


class EmptyBall(EotError):
    """No sample of the product measure landed inside the requested ball."""
