"""Exception hierarchy shared by all twomode modules."""


class TwoModeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(TwoModeError):
    """Parameter set violates a structural constraint (ordering, signs, ratios)."""


class BelowThreshold(TwoModeError):
    """Pump is at or below the self-oscillation threshold (Xi <= 1)."""


class ZeroStateStable(TwoModeError):
    """Requested oscillating-branch quantity does not exist (Delta_F <= -omega_c)."""


class InvalidCalibration(TwoModeError):
    """Pump calibration is unusable (non-positive slope or mass scale)."""


class StepTooLarge(TwoModeError):
    """Integrator step violates dt * max(Gamma_2, |Delta_F|) <= 1e-2."""


class NonFinite(TwoModeError):
    """Trajectory left the finite domain; carries the first bad time."""

    def __init__(self, message, t_bad=None):
        super().__init__(message)
        self.t_bad = t_bad


class InsufficientResolution(TwoModeError):
    """Trajectory is sampled too coarsely for the requested detection filter."""


class ScaleTooLarge(TwoModeError):
    """Full-equation oracle requested outside its validated toy scale."""


class DegenerateSpectrum(TwoModeError):
    """Eigenvalues coincide within tolerance; biorthogonal expansion unreliable."""


class NonlinearRegime(TwoModeError):
    """Perturbation too large for the linearized transient theory."""


class NotAdiabatic(TwoModeError):
    """Pulse slope violates the adiabaticity precondition beyond tolerance."""


class UnwrapFault(TwoModeError):
    """Phase unwrapping saw a sample-to-sample jump larger than pi/2."""


class TooShort(TwoModeError):
    """Record has too few samples for the requested statistic."""


class NonUniformSampling(TwoModeError):
    """Record is not uniformly sampled."""


class DegenerateData(TwoModeError):
    """Fit input carries no usable signal (e.g. all abscissae zero)."""


class AmplitudeCollapse(TwoModeError):
    """Oscillation collapsed to the zero state during a stabilization run."""

    def __init__(self, message, cycle=None, run=None):
        super().__init__(message)
        self.cycle = cycle
        self.run = run


class ConfigError(TwoModeError):
    """Parameter file is malformed, has unknown keys, or missing required keys."""


class ExcursionWarning(UserWarning):
    """Pump-phase program exceeded the configured excursion limit."""
