"""Exception types shared across the package."""


class GaussDomainError(Exception):
    """Base class for all library errors."""


class GridTooNarrowError(GaussDomainError):
    """Grid does not span enough decades toward the limit point."""


class NonPositiveIndexError(GaussDomainError):
    """Asymptotic inversion requested for a non-positive variation index."""


class ValueRangeError(GaussDomainError):
    """Function values span too narrow a range to invert."""


class InversionError(GaussDomainError):
    """Asymptotic inverse failed its composition post-condition."""


class MeasureDefinitionError(GaussDomainError):
    """Measure parameters violate a construction invariant."""


class QuadratureError(GaussDomainError):
    """Adaptive quadrature did not reach the requested accuracy."""


class UnsupportedOperationError(GaussDomainError):
    """Operation is not defined for this measure kind."""


class VanishingTraceError(GaussDomainError):
    """Trace curve is (numerically) zero on the trailing grid."""


class FiniteSecondMomentError(GaussDomainError):
    """Input has a finite second moment where an infinite one is required."""


class NotInDomainError(GaussDomainError):
    """Scaling requested for a curve that is not matrix regularly varying."""


class FamilyTooShortError(GaussDomainError):
    """Measure family has too few members for a stability check."""


class TooFewSamplesError(GaussDomainError):
    """Sample set is below the minimum size for a reliable test."""


class InfiniteIntensityError(GaussDomainError):
    """Jump cutoff leads to an unrepresentable compound-Poisson intensity."""


class ConfigError(GaussDomainError):
    """Experiment configuration is invalid; message names the field."""
