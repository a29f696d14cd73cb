"""Lock-in detection model: low-pass filtering, decimation, read-out noise.

The observer demodulates each envelope against a chosen reference frame
(normally the self-oscillation frequencies), applies a first-order low-pass
with time constant tau_lockin, decimates to the detector cadence, then adds
independent Gaussian noise to both quadratures of each decimated sample.
For r >> sigma_det the resulting phase error has variance sigma_det^2/r^2.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import lfilter

from .errors import InsufficientResolution, InvalidParams, TooShort
from .slowflow import Trajectory


@dataclass(frozen=True)
class DetectionModel:
    """Detector chain settings.

    tau_lockin : first-order low-pass time constant (s)
    sample_period : detector cadence (s); must not undersample the filter
    sigma_det1/2 : additive quadrature noise per decimated sample (m)
    """

    tau_lockin: float = 1.0e-3
    sample_period: float = 4.4e-3
    sigma_det1: float = 0.0
    sigma_det2: float = 0.0

    def __post_init__(self):
        vals = (self.tau_lockin, self.sample_period,
                self.sigma_det1, self.sigma_det2)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParams("detection settings must be finite")
        if self.tau_lockin <= 0 or self.sample_period <= 0:
            raise InvalidParams("tau_lockin and sample_period must be > 0")
        if self.sample_period < self.tau_lockin:
            raise InvalidParams("sample_period must be >= tau_lockin")
        if self.sigma_det1 < 0 or self.sigma_det2 < 0:
            raise InvalidParams("sigma_det must be >= 0")


class PhaseRecord:
    """Decimated detector output: phases, amplitudes, diagnostics."""

    def __init__(self, t, phi1, phi2, r1, r2, sample_period, frame,
                 jump_flags, seed=None):
        self.t = t
        self.phi1 = phi1
        self.phi2 = phi2
        self.r1 = r1
        self.r2 = r2
        self.sample_period = sample_period
        self.frame = frame
        self.jump_flags = jump_flags
        self.seed = seed

    @property
    def phi_plus(self):
        return self.phi1 + self.phi2

    @property
    def phi_minus(self):
        return self.phi1 - self.phi2

    def __len__(self):
        return self.t.size


def _lowpass(v, alpha):
    # z[k] = (1-alpha) z[k-1] + alpha v[k], preloaded so z[0] = v[0]
    b = np.array([alpha])
    a = np.array([1.0, alpha - 1.0])
    zi = np.array([(1.0 - alpha) * v[0]])
    out, _ = lfilter(b, a, v, zi=zi)
    return out


def observe(traj: Trajectory, det: DetectionModel, frame=None,
            seed=None) -> PhaseRecord:
    """Run the detector chain over a sampled trajectory.

    frame : (omega_ref1, omega_ref2) lock-in references in rad/s; defaults
    to the self-oscillation frequencies implied by traj.frame_delta_omega,
    in which case the demodulated phases sit still on the stationary orbit.
    """
    if len(traj) < 2:
        raise TooShort("need at least two trajectory samples")
    dt_s = traj.t[1] - traj.t[0]
    if dt_s > det.tau_lockin / 10.0 * (1 + 1e-9):
        raise InsufficientResolution(
            f"trajectory sampled every {dt_s:.3e} s cannot resolve a "
            f"{det.tau_lockin:.3e} s filter; need dt <= tau/10")

    p = traj.params
    if frame is None:
        w1_ref = p.omega1 + traj.frame_delta_omega
        w2_ref = p.omega2 + p.delta_f - traj.frame_delta_omega
    else:
        w1_ref, w2_ref = frame
    # u_i live in frames (omega1, omega2 + delta_f); residual rotations:
    v1 = traj.u1 * np.exp(-1j * (w1_ref - p.omega1) * traj.t)
    v2 = traj.u2 * np.exp(-1j * (w2_ref - p.omega2 - p.delta_f) * traj.t)

    alpha = 1.0 - np.exp(-dt_s / det.tau_lockin)
    z1 = _lowpass(v1, alpha)
    z2 = _lowpass(v2, alpha)

    k_dec = max(1, int(round(det.sample_period / dt_s)))
    idx = np.arange(0, len(traj), k_dec)
    if idx.size < 2:
        raise TooShort("fewer than two detector samples in the record")
    z1 = z1[idx]
    z2 = z2[idx]

    if det.sigma_det1 > 0 or det.sigma_det2 > 0:
        rng = np.random.default_rng(seed)
        xi = rng.standard_normal((idx.size, 4))
        z1 = z1 + det.sigma_det1 * (xi[:, 0] + 1j * xi[:, 1])
        z2 = z2 + det.sigma_det2 * (xi[:, 2] + 1j * xi[:, 3])

    phi1 = np.unwrap(np.angle(z1))
    phi2 = np.unwrap(np.angle(z2))
    flags = (bool(np.any(np.abs(np.diff(phi1)) > 0.5 * np.pi)),
             bool(np.any(np.abs(np.diff(phi2)) > 0.5 * np.pi)))
    return PhaseRecord(traj.t[idx], phi1, phi2, np.abs(z1), np.abs(z2),
                       k_dec * dt_s, (w1_ref, w2_ref), flags, seed)
