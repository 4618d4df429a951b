"""Exception hierarchy shared across the package."""


class EnsembleLabError(Exception):
    """Base class for all package errors."""


class DomainError(EnsembleLabError, ValueError):
    """A parameter lies outside the admissible domain of an operation."""


class CapacityError(EnsembleLabError):
    """An exact computation was requested beyond its enumeration capacity."""


class DegenerateEnsembleError(DomainError):
    """The requested ensemble is degenerate (zero-dimensional constraint set)."""


class QuadratureError(EnsembleLabError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, best_estimate=None, achieved_tolerance=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.achieved_tolerance = achieved_tolerance


class SampleError(EnsembleLabError):
    """A Monte Carlo draw produced a non-finite value."""

    def __init__(self, message, draw_index=None):
        super().__init__(message)
        self.draw_index = draw_index
