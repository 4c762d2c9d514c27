"""Exception hierarchy shared by all modules."""


class WillmoreError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(WillmoreError, ValueError):
    """Invalid input parameters (CLI exit code 1)."""


class NumericalFailure(WillmoreError, RuntimeError):
    """A numerical procedure failed (CLI exit code 2)."""


# lattice
class NonPositiveImaginaryPart(ValidationError):
    pass


class ModularReductionFailure(NumericalFailure):
    pass


# elliptic / meromorphic
class PoleAtInput(ValidationError):
    pass


class ResiduesDoNotSumToZero(ValidationError):
    pass


class DuplicatePoles(ValidationError):
    pass


class CriticalValue(ValidationError):
    pass


class NonSimpleZero(NumericalFailure):
    pass


class ContourHitsPole(ValidationError):
    pass


class ConvergenceFailure(NumericalFailure):
    pass


# immersion
class RetryExhausted(NumericalFailure):
    pass


class UnexpectedPreimage(NumericalFailure):
    pass


# geometry
class DegeneratePoint(NumericalFailure):
    pass


class RefinementBudgetExceeded(NumericalFailure):
    pass


class SolverDivergence(NumericalFailure):
    pass


class NonPositiveDefiniteMetric(NumericalFailure):
    pass


# perturbation
class ChartPackingFailure(NumericalFailure):
    pass


class NewtonDivergence(NumericalFailure):
    pass


# analysis
class IllConditionedBasis(NumericalFailure):
    pass


class PathHitsPole(ValidationError):
    pass
