"""
Exceptions raised by specfactors.

Every error is a ValueError so callers that only care about bad input can
catch the builtin.
"""


class SpectralFactorError(ValueError):
    """
    Base class for all specfactors errors.
    """


class ModelFileError(SpectralFactorError):
    """
    A model or spec file could not be read or failed validation.
    """


# matnum

class SingularSteinOperator(SpectralFactorError):
    pass


class NotPositiveDefinite(SpectralFactorError):
    pass


class RankDeficientBasis(SpectralFactorError):
    pass


class AmbiguousEigenspace(SpectralFactorError):
    """
    A selected eigenvalue has multiplicity > 1, so the invariant subspace
    is one member of a continuum. Pass an explicit basis instead.
    """


class ComplexPairSplit(SpectralFactorError):
    pass


# statespace

class DimensionMismatch(SpectralFactorError):
    pass


class EvaluationAtPole(SpectralFactorError):
    pass


class SingularFeedthrough(SpectralFactorError):
    pass


class SingularStateMatrix(SpectralFactorError):
    pass


class ParameterHitsSpectrum(SpectralFactorError):
    pass


class NoParameterFound(SpectralFactorError):
    pass


# spectral

class NotOuter(SpectralFactorError):
    pass


class ImproperRealization(NotOuter):
    """
    Singular state matrix or feedthrough: the density has a pole or zero at
    infinity. Move it away with a Moebius change of variable first.
    """


class NotPositiveDefiniteY(SpectralFactorError):
    pass


class GramianIdentityViolation(SpectralFactorError):
    pass


# divisors

class InvalidSubspace(SpectralFactorError):
    pass


class NotInvariant(InvalidSubspace):
    pass


class CompressionNotPD(SpectralFactorError):
    pass


class DivisorNotAllPass(SpectralFactorError):
    pass


class DegreeAdditivityViolation(SpectralFactorError):
    """
    Degrees of a divisor and its complement do not add up. This signals a
    numerical rank failure, not a mathematical one.
    """


# factors

class DegreeViolation(SpectralFactorError):
    pass


class SpectrumMismatch(SpectralFactorError):
    pass


class NotAFactor(SpectralFactorError):
    pass


class NotMinimalFactor(SpectralFactorError):
    pass
