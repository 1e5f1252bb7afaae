"""Exception hierarchy shared across the package."""


class HJLabError(Exception):
    """Base class for all package errors."""


class DomainError(HJLabError):
    """Evaluation outside the model's validity box, or a search region
    escaping it.  CLI maps this to exit code 3."""


class BoundaryExitError(DomainError):
    """An integrated arc left the validity box.  Carries the exit time."""

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = float(exit_time)


class NumericalError(HJLabError):
    """Non-finite values or an exhausted evaluation budget."""


class ConvergenceError(NumericalError):
    """An iterative solve did not converge within its iteration cap."""


class ShootingError(ConvergenceError):
    """Two-point boundary value shooting failed; usually the requested
    endpoints are outside the small-time uniqueness ball."""


class ConfigError(HJLabError):
    """Invalid run configuration.  CLI maps this to exit code 2."""


class InconsistencyError(HJLabError):
    """Cross-checks disagree, e.g. a trace classified classical whose
    extracted initial momentum is not a proximal subgradient."""


class TheoremViolationError(InconsistencyError):
    """A theorem-mandated outcome failed numerically; never silently
    accepted."""
