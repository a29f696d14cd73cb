"""Direct integration of the second-order displacement equations.

Serves as the independent oracle for the envelope reduction: no rotating
frame, no averaging, just the driven coupled Duffing pair

    q1'' + 2 Gamma_1 q1' + omega1^2 q1 + (duff1/m1) q1^3
        + (coupling/m1) q1 q2^2 = (f_drive/m1) q2 cos(omega_f t + theta_f)

and the mirror equation for q2.  Feasible only at toy scale: the step must
resolve the fast mode, so realistic frequency ratios are rejected.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import _kernels
from .errors import InvalidParams, NonFinite, ScaleTooLarge, StepTooLarge
from .params import SystemParams, stationary_state
from .slowflow import Trajectory, _frame_delta_omega

MAX_FREQ_RATIO = 50.0
MAX_FAST_CYCLES = 1.0e6


@dataclass(frozen=True)
class FullModelParams:
    """Bare (unreduced) constants of the coupled-oscillator equations."""

    m1: float
    m2: float
    omega1: float
    omega2: float
    gamma1_damp: float
    gamma2_damp: float
    duff1: float        # kg rad^2 s^-2 m^-2
    duff2: float
    coupling: float     # kg rad^2 s^-2 m^-2, dispersive q1^2 q2^2 term
    f_drive: float      # N/m pump force-gradient amplitude

    def __post_init__(self):
        vals = [self.m1, self.m2, self.omega1, self.omega2,
                self.gamma1_damp, self.gamma2_damp,
                self.duff1, self.duff2, self.coupling, self.f_drive]
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParams("full-model parameters must be finite")
        if self.m1 <= 0 or self.m2 <= 0:
            raise InvalidParams("masses must be > 0")
        if not (0 < self.omega1 < self.omega2):
            raise InvalidParams("need 0 < omega1 < omega2")
        if self.gamma1_damp <= 0 or self.gamma2_damp <= 0:
            raise InvalidParams("damping rates must be > 0")
        if self.f_drive < 0:
            raise InvalidParams("f_drive must be >= 0")


def leading_order_params(fp: FullModelParams, omega_f: float,
                         theta_f: float = 0.0) -> SystemParams:
    """Envelope-equation constants implied by the bare ones.

    Mass-normalizing the displacement equations gives g_ij = duff_or_
    coupling/m_i and f_i = f_drive/m_i, so f1 g21 = f2 g12 automatically.
    """
    return SystemParams(
        omega1=fp.omega1, omega2=fp.omega2,
        gamma1_damp=fp.gamma1_damp, gamma2_damp=fp.gamma2_damp,
        g11=fp.duff1 / fp.m1, g22=fp.duff2 / fp.m2,
        g12=fp.coupling / fp.m1, g21=fp.coupling / fp.m2,
        f1=fp.f_drive / fp.m1, f2=fp.f_drive / fp.m2,
        delta_f=omega_f - fp.omega1 - fp.omega2, theta_f=theta_f)


def full_model_oracle(fp: FullModelParams, drive, tspan, dt=None,
                      init=None, record_stride=None) -> Trajectory:
    """Integrate the displacement equations and demodulate the envelopes.

    drive : (omega_f, theta_f) pump frequency (rad/s) and phase (rad)
    init  : optional (q1, dq1, q2, dq2); default seeds the predicted
            stationary orbit so the comparison does not wait for growth.

    Returns a Trajectory of demodulated envelopes u_i(t) in the standard
    frames (omega1, omega2 + delta_f), smoothed over one fast period per
    mode to suppress the counter-rotating ripple.
    """
    omega_f, theta_f = drive
    if fp.omega2 / fp.omega1 > MAX_FREQ_RATIO:
        raise ScaleTooLarge(
            f"omega2/omega1 = {fp.omega2 / fp.omega1:.1f} exceeds "
            f"{MAX_FREQ_RATIO:.0f}; the fast oracle is toy-scale only")
    t0, t1 = float(tspan[0]), float(tspan[1])
    if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
        raise InvalidParams("tspan must be finite with t1 > t0")
    cycles = (t1 - t0) * fp.omega2 / (2 * np.pi)
    if cycles > MAX_FAST_CYCLES:
        raise ScaleTooLarge(
            f"{cycles:.2e} fast cycles exceeds the {MAX_FAST_CYCLES:.0e} budget")

    if dt is None:
        dt = 2 * np.pi / (48.0 * fp.omega2)
    if dt > 2 * np.pi / (40.0 * fp.omega2) * (1 + 1e-12):
        raise StepTooLarge("need dt <= 2*pi/(40*omega2) to resolve mode 2")

    p_slow = leading_order_params(fp, omega_f, theta_f)
    n_steps = max(1, int(round((t1 - t0) / dt)))

    if record_stride is None:
        record_stride = max(1, n_steps // 2_000_000)
    record_stride = int(record_stride)

    if init is None:
        ss = stationary_state(p_slow)
        ph = 0.5 * ss.phi_plus_0
        u10 = ss.r1_0 * np.exp(1j * ph)
        u20 = ss.r2_0 * np.exp(1j * ph)
        # q = 2 Re u, dq/dt = -2 omega_frame Im u at t = 0
        init = (2 * u10.real, -2 * fp.omega1 * u10.imag,
                2 * u20.real, -2 * (fp.omega2 + p_slow.delta_f) * u20.imag)
    y = np.array(init, dtype=np.float64)
    if y.shape != (4,) or not np.all(np.isfinite(y)):
        raise InvalidParams("init must be 4 finite numbers (q1, dq1, q2, dq2)")

    n_rec = n_steps // record_stride + 1
    out = np.empty((n_rec, 4), dtype=np.float64)
    out[0] = y
    rec_done = 1
    chunk = 1 << 20
    k = 0
    while k < n_steps:
        m = min(chunk, n_steps - k)
        rec_done += _kernels.fast_chunk(
            y, t0 + k * dt, m, dt,
            fp.omega1 ** 2, fp.omega2 ** 2,
            2.0 * fp.gamma1_damp, 2.0 * fp.gamma2_damp,
            fp.duff1 / fp.m1, fp.duff2 / fp.m2,
            fp.coupling / fp.m1, fp.coupling / fp.m2,
            fp.f_drive / fp.m1, fp.f_drive / fp.m2,
            omega_f, theta_f, out[rec_done:], record_stride, k)
        k += m
        if not np.all(np.isfinite(y)):
            raise NonFinite("displacement integration overflowed",
                            t_bad=t0 + k * dt)

    t = t0 + dt * record_stride * np.arange(n_rec)
    w1f = fp.omega1
    w2f = fp.omega2 + p_slow.delta_f
    u1 = 0.5 * (out[:, 0] - 1j * out[:, 1] / w1f) * np.exp(-1j * w1f * t)
    u2 = 0.5 * (out[:, 2] - 1j * out[:, 3] / w2f) * np.exp(-1j * w2f * t)

    # average over one fast period per mode to kill the 2*omega ripple
    dts = dt * record_stride
    for w, arr in ((w1f, u1), (w2f, u2)):
        win = max(1, int(round(2 * np.pi / w / dts)))
        if win > 1:
            arr.real[:] = uniform_filter1d(arr.real, win, mode="nearest")
            arr.imag[:] = uniform_filter1d(arr.imag, win, mode="nearest")

    return Trajectory(t, u1, u2, dts, 1, p_slow, _frame_delta_omega(p_slow))


def phase_slope(traj: Trajectory, mode: int, window: float = 0.25):
    """Linear-fit rotation rate (rad/s) of one demodulated envelope.

    Fits the unwrapped raw angle (no frame correction) over the trailing
    ``window`` fraction of the record; the intercept is discarded.
    """
    if mode not in (1, 2):
        raise InvalidParams("mode must be 1 or 2")
    u = traj.u1 if mode == 1 else traj.u2
    n0 = int((1.0 - window) * len(traj))
    t = traj.t[n0:]
    ph = np.unwrap(np.angle(u[n0:]))
    return float(np.polyfit(t - t[0], ph, 1)[0])


def steady_amplitude(traj: Trajectory, mode: int, window: float = 0.25):
    """Mean |u| over the trailing ``window`` fraction of the record."""
    if mode not in (1, 2):
        raise InvalidParams("mode must be 1 or 2")
    u = traj.u1 if mode == 1 else traj.u2
    n0 = int((1.0 - window) * len(traj))
    return float(np.mean(np.abs(u[n0:])))
