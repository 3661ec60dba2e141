"""Exception taxonomy shared by all monodt subsystems."""

from __future__ import annotations


class MonodtError(Exception):
    """Base class for all monodt errors."""


class ConfigError(MonodtError):
    """Invalid run configuration.

    Parameters
    ----------
    locator : str
        Path-like location of the offending field, e.g. ``"grid.nodes"``.
    message : str
        Human-readable description of the violation.
    """

    def __init__(self, locator: str, message: str):
        self.locator = locator
        super().__init__(f"{locator}: {message}")


class DimensionError(MonodtError):
    """Array size does not match the grid or operator it is used with."""


class NumericalOverflow(MonodtError):
    """A computed quantity became non-finite or left its physical range.

    Attributes
    ----------
    time : float or None
        Simulation time at which the blow-up was detected.
    variable_index : int or None
        Index of the first offending state variable, when known.
    """

    def __init__(self, message: str = "numerical overflow", *, time: float | None = None,
                 variable_index: int | None = None):
        self.time = time
        self.variable_index = variable_index
        if time is not None:
            message = f"{message} at t={time:g}"
        super().__init__(message)


class Unsupported(MonodtError):
    """Requested operation is not available for this model or scheme."""


class SwitchProximity(MonodtError):
    """Jacobian evaluation point could not be moved clear of a model switch."""


class FactorizationError(MonodtError):
    """Tridiagonal factorization hit a zero pivot (non-dominant matrix)."""


class EigenConvergenceError(MonodtError):
    """QR eigenvalue iteration failed to converge within the sweep cap."""


class NotYetAvailable(MonodtError):
    """Scheme output requested before the scheme has produced it."""


class WaveNotArrived(MonodtError):
    """The potential at a probe node never crossed the threshold."""


class DegenerateProbe(MonodtError):
    """Probe pair produced no usable wave speed (T2 <= T1)."""


class BracketError(MonodtError):
    """Bisection bracket invalid: both endpoints stable or both unstable."""


class TargetUnreachable(MonodtError):
    """Accuracy target cannot be met below the scheme's stable time-step.

    Attributes
    ----------
    error_at_limit : float
        Error achieved at the largest stable time-step.
    """

    def __init__(self, message: str, error_at_limit: float):
        self.error_at_limit = error_at_limit
        super().__init__(message)
