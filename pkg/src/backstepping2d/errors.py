"""Exception hierarchy shared by all modules."""


class BacksteppingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BacksteppingError, ValueError):
    """An argument lies outside the set on which a function is defined."""


class GeometryError(BacksteppingError, ValueError):
    """A boundary graph or grid cannot represent the requested domain."""


class ConfigError(BacksteppingError, ValueError):
    """A simulation configuration is invalid."""


class UsageError(BacksteppingError, ValueError):
    """A diagnostic was called with input it cannot work with."""


class ConvergenceError(BacksteppingError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last residual reached is kept on ``residual``.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularTransformError(BacksteppingError, ArithmeticError):
    """The discrete Volterra system has a (near) zero pivot."""


class DivergenceError(BacksteppingError, RuntimeError):
    """A time integration blew up.

    ``step`` is the index of the offending step and ``trajectory`` holds
    everything recorded up to it, so an open-loop blow-up can still be
    reported.
    """

    def __init__(self, message, step, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory
