"""Two nonlinearly coupled resonator modes under a blue-detuned pump.

Simulation of the coupled envelope (slow-flow) equations, linearized
transient theory around the self-oscillating state, discrete pump-phase
feedback, and the analysis helpers used to characterize phase diffusion
and its suppression.
"""

from .analysis import (GAMMA_DISPERSIVE_REF, DetuneSweep, DiffusionStats,
                       DispersiveFit, PumpSweep, SpectrumEstimate,
                       fit_dispersive_coupling, linewidth,
                       phase_diffusion_stats, spectrum, ssb_phase_noise,
                       sweep_amplitude_vs_detuning, sweep_lambda3_vs_pump)
from .controller import (ControllerStats, CycleConfig, SlowFlowPlant,
                         StabilizationRun, controller_statistics,
                         stabilize_mode1, stabilize_mode2, theta_next_mode1,
                         theta_next_mode2)
from .detection import DetectionModel, PhaseRecord, observe
from .errors import (AmplitudeCollapse, BelowThreshold, ConfigError,
                     DegenerateData, DegenerateSpectrum, ExcursionWarning,
                     InsufficientResolution, InvalidCalibration,
                     InvalidParams, NonFinite, NonlinearRegime,
                     NonUniformSampling, NotAdiabatic, ScaleTooLarge,
                     StepTooLarge, TooShort, TwoModeError, UnwrapFault,
                     ZeroStateStable)
from .fullmodel import (FullModelParams, full_model_oracle,
                        leading_order_params, phase_slope, steady_amplitude)
from .params import (DEFAULT_CALIBRATION, CouplingSplit, DerivedConstants,
                     PumpCalibration, StationaryState, SystemParams,
                     coupling_g, derive_constants, fit_kappa, pump_map,
                     stationary_state)
from .slowflow import (EnsembleTrajectory, NoiseConfig, ThetaSchedule,
                       Trajectory, default_dt, integrate_ensemble,
                       integrate_slowflow, stationary_theta0)
from .stability import (BifurcationEigs, EigenSystem, Jacobian3,
                        PulseResponse, StepResponse,
                        adiabatic_pulse_response, bifurcation_eigs,
                        build_jacobian, compute_C_spectral, eigensystem,
                        step_response)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeCollapse", "BelowThreshold", "BifurcationEigs", "ConfigError",
    "ControllerStats", "CouplingSplit", "CycleConfig", "DEFAULT_CALIBRATION",
    "DegenerateData", "DegenerateSpectrum", "DerivedConstants",
    "DetectionModel", "DetuneSweep", "DiffusionStats", "DispersiveFit",
    "EigenSystem", "EnsembleTrajectory", "ExcursionWarning",
    "FullModelParams", "GAMMA_DISPERSIVE_REF", "InsufficientResolution",
    "InvalidCalibration", "InvalidParams", "Jacobian3", "NoiseConfig",
    "NonFinite", "NonUniformSampling", "NonlinearRegime", "NotAdiabatic",
    "PhaseRecord", "PulseResponse", "PumpCalibration", "PumpSweep",
    "ScaleTooLarge",
    "SlowFlowPlant", "SpectrumEstimate", "StabilizationRun",
    "StationaryState", "StepResponse", "StepTooLarge", "SystemParams",
    "ThetaSchedule", "TooShort", "Trajectory", "TwoModeError", "UnwrapFault",
    "ZeroStateStable", "adiabatic_pulse_response", "bifurcation_eigs",
    "build_jacobian", "compute_C_spectral", "controller_statistics",
    "coupling_g", "default_dt", "derive_constants", "eigensystem",
    "fit_dispersive_coupling", "fit_kappa", "full_model_oracle",
    "integrate_ensemble", "integrate_slowflow", "leading_order_params",
    "linewidth", "observe", "phase_diffusion_stats", "phase_slope", "pump_map",
    "spectrum", "ssb_phase_noise", "stabilize_mode1", "stabilize_mode2",
    "stationary_state", "stationary_theta0", "steady_amplitude",
    "step_response", "sweep_amplitude_vs_detuning", "sweep_lambda3_vs_pump",
    "theta_next_mode1", "theta_next_mode2",
]
