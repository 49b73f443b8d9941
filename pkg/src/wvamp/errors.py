"""Exception hierarchy.

Errors split into two families so callers (the CLI in particular) can tell
bad input apart from a numerical breakdown.
"""


class WvampError(Exception):
    """Base class for every error raised by this package."""


class InputError(WvampError, ValueError):
    """Parameters outside the domain of an operation."""


class NumericalError(WvampError, ArithmeticError):
    """A computation could not reach the requested accuracy."""


# model
class OrthogonalPostSelection(InputError):
    pass


class DegenerateWeakValue(InputError):
    pass


class TrivialWeakValue(InputError):
    pass


# quadrature
class QuadratureError(NumericalError):
    pass


class MaxSubdivisionsExceeded(QuadratureError):
    pass


class RoundoffLimited(QuadratureError):
    pass


class NonFiniteEvaluation(QuadratureError):
    pass


class ZeroNorm(NumericalError):
    pass


class SingularProbe(NumericalError):
    pass


# probes
class OutOfSupport(InputError):
    pass


class EvaluationAtSingularity(NumericalError):
    pass


class MeanKernelNormOutOfRange(InputError):
    pass


class NoSingularPointInInterval(InputError):
    pass


# lerch
class SeriesDomain(InputError):
    pass


class PoleHit(NumericalError):
    pass


# fourier
class WrongRepresentation(InputError):
    pass


# cli
class ScenarioError(InputError):
    pass
