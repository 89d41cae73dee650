"""Exception types shared across the package."""


class PileupError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(PileupError, ValueError):
    """An argument violates a documented precondition."""


class InfeasibleBoundsError(ParameterError):
    """Rejection sampling cannot succeed with the requested truncation."""


class DegenerateShapeError(ParameterError):
    """A pulse shape underflowed to zero everywhere on its support."""


class ConfigError(PileupError, ValueError):
    """An experiment or dictionary configuration document is invalid."""


class SignalFormatError(PileupError, ValueError):
    """A signal or ground-truth file does not parse as documented."""


class UndefinedRateError(PileupError):
    """A rate estimator has no events (or a zero last arrival) to work with."""


class NonConvergenceError(PileupError):
    """Coordinate descent ran out of sweeps before reaching tolerance.

    Carries the best iterate found so far in ``regressor`` and its
    stationarity violation in ``kkt_violation``.
    """

    def __init__(self, message, regressor=None, kkt_violation=None):
        super().__init__(message)
        self.regressor = regressor
        self.kkt_violation = kkt_violation


class PathExhaustedError(PileupError):
    """The penalty path hit its last step without meeting the residual target."""

    def __init__(self, message, r_last=None, residual_norm=None, target=None):
        super().__init__(message)
        self.r_last = r_last
        self.residual_norm = residual_norm
        self.target = target


class OracleFailureError(PileupError):
    """The reference solver hit its iteration cap (test infrastructure)."""
