"""Exceptions shared across the package."""


class NumericalFailure(ArithmeticError):
    """An iterative linear-algebra routine did not converge."""


class DimensionMismatch(ValueError):
    pass


class NotPsd(ValueError):
    """The Hessian has an eigenvalue below the negative tolerance."""


class NotSaddle(ValueError):
    """The system has no direction of negative curvature."""


class MismatchedSystems(ValueError):
    pass


class Diverged(RuntimeError):
    """Raised when a Langevin run blows up.

    The partial trajectory is attached so callers can inspect the series
    up to the divergence step.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotSettledWarning(RuntimeWarning):
    """The averaging window does not look stationary."""
