"""Exception hierarchy shared by the package."""


class NewsFactorError(Exception):
    """Base class for all package errors."""


class DimensionError(NewsFactorError, ValueError):
    """Operands have non-conformable shapes."""


class NumericalError(NewsFactorError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class ConvergenceError(NumericalError):
    """An iterative method hit its iteration cap."""


class SingularityError(NumericalError):
    """A linear system turned out to be (numerically) singular."""


class DivergenceError(NumericalError):
    """An iterate became non-finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DataError(NewsFactorError, ValueError):
    """Input data violates a precondition (bad prices, malformed rows...)."""


class UndefinedMetricError(NewsFactorError, ValueError):
    """A metric has no meaningful value for the given input."""
