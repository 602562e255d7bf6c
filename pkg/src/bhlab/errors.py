"""Exception hierarchy shared by every module of the package."""


class BHLabError(Exception):
    """Base class for all errors raised by bhlab."""


class ConfigurationError(BHLabError, ValueError):
    """Invalid parameters, malformed config files, mismatched shapes."""


class PreconditionError(BHLabError, ValueError):
    """An operation was called on input violating its documented precondition."""


class QuadratureError(BHLabError, RuntimeError):
    """Refinement did not reach the requested tolerance.

    ``achieved`` carries the last error estimate so callers can decide
    whether the value is still usable.
    """

    def __init__(self, message, achieved=float("nan"), value=float("nan")):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved
        self.value = value


class SchemeDivergenceError(BHLabError, FloatingPointError):
    """The time integrator produced non-finite values."""
