"""Time-domain integration of the coupled envelope equations.

The state is the pair of complex envelopes (u1, u2) defined in the frames
rotating at omega_1 and omega_2 + Delta_F, so the pump enters only through
its detuning and phase.  Integration is fixed-step classical RK4; phase
diffusion is modelled as additive complex noise applied after each step,
with variance d*dt per quadrature (so Var[Re u] grows as d*t).

Reproducibility contract: given identical (params, init, dt, schedule,
noise config, record_stride) the sampled trajectory is bit-identical,
independent of internal chunking.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import (BelowThreshold, InvalidParams, NonFinite, StepTooLarge,
                     ZeroStateStable)
from .params import SystemParams, stationary_state

# dt * max(Gamma_2, |Delta_F|) above this is rejected outright
STEP_BOUND = 1.0e-2

# cap per-chunk noise buffers around 8 MB
_CHUNK_BYTES = 8 << 20


def default_dt(p: SystemParams) -> float:
    """A step size comfortably inside the stability bound."""
    scale = max(p.gamma1_damp, p.gamma2_damp, abs(p.delta_f))
    return 0.2 * STEP_BOUND / scale


@dataclass(frozen=True)
class NoiseConfig:
    """Additive quadrature noise levels (m^2/s) and the RNG seed."""

    d1: float = 0.0
    d2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0 or not np.isfinite(self.d1 + self.d2):
            raise InvalidParams("noise strengths must be finite and >= 0")

    @property
    def active(self) -> bool:
        return self.d1 > 0 or self.d2 > 0


class ThetaSchedule:
    """Piecewise-constant pump phase theta_F(t).

    ``times`` must be strictly increasing; ``values[i]`` applies on
    [times[i], times[i+1]).  Before times[0] the first value applies.
    Change times are snapped to the nearest integration step.
    """

    def __init__(self, times, values):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        v = np.atleast_1d(np.asarray(values, dtype=float))
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise InvalidParams("schedule times/values must be equal-length 1-d")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidParams("schedule entries must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvalidParams("schedule times must be strictly increasing")
        self.times = t
        self.values = v

    @classmethod
    def constant(cls, theta: float = 0.0) -> "ThetaSchedule":
        return cls([0.0], [theta])

    @classmethod
    def step(cls, t_step: float, before: float, after: float) -> "ThetaSchedule":
        if t_step <= 0:
            return cls([t_step], [after])
        return cls([0.0, t_step], [before, after])

    def value(self, t: float) -> float:
        i = np.searchsorted(self.times, t, side="right") - 1
        return float(self.values[max(i, 0)])


def _coeffs(p: SystemParams, theta: float):
    """Kernel coefficients for one constant-theta segment."""
    c1 = complex(-p.gamma1_damp, 0.0)
    c2 = complex(-p.gamma2_damp, -p.delta_f)
    a11 = 1.5 * p.g11 / p.omega1
    a12 = p.g12 / p.omega1
    a22 = 1.5 * p.g22 / p.omega2
    a21 = p.g21 / p.omega2
    eith = complex(np.cos(theta), np.sin(theta))
    d1 = -1j * (p.f1 / (4.0 * p.omega1)) * eith
    d2 = -1j * (p.f2 / (4.0 * p.omega2)) * eith
    return c1, c2, a11, a12, a22, a21, d1, d2


def _frame_delta_omega(p: SystemParams) -> float:
    try:
        return stationary_state(p).delta_omega
    except (BelowThreshold, ZeroStateStable):
        return 0.0


class Trajectory:
    """Sampled envelope trajectory plus frame bookkeeping.

    Phases are reported in the self-oscillation frame: phi1 subtracts the
    drift delta_omega accumulated by u1 and phi2 adds it back, so both are
    flat on the stationary orbit.  Unwrapping happens after the frame
    correction; a residual sample-to-sample jump above pi/2 sets the
    corresponding entry of ``phase_jump_flags`` instead of being hidden.
    """

    def __init__(self, t, u1, u2, dt, record_stride, params, frame_delta_omega,
                 seed=None):
        self.t = t
        self.u1 = u1
        self.u2 = u2
        self.dt = dt
        self.record_stride = record_stride
        self.params = params
        self.frame_delta_omega = frame_delta_omega
        self.seed = seed

    @property
    def r1(self):
        return np.abs(self.u1)

    @property
    def r2(self):
        return np.abs(self.u2)

    @cached_property
    def phi1(self):
        framed = self.u1 * np.exp(-1j * self.frame_delta_omega * self.t)
        return np.unwrap(np.angle(framed))

    @cached_property
    def phi2(self):
        framed = self.u2 * np.exp(1j * self.frame_delta_omega * self.t)
        return np.unwrap(np.angle(framed))

    @property
    def phi_plus(self):
        return self.phi1 + self.phi2

    @property
    def phi_minus(self):
        return self.phi1 - self.phi2

    @cached_property
    def phase_jump_flags(self):
        f1 = bool(np.any(np.abs(np.diff(self.phi1)) > 0.5 * np.pi))
        f2 = bool(np.any(np.abs(np.diff(self.phi2)) > 0.5 * np.pi))
        return (f1, f2)

    @property
    def final_state(self):
        return (self.u1[-1], self.u2[-1])

    def __len__(self):
        return self.t.size


class EnsembleTrajectory:
    """Stack of trajectories sharing time grid, params and frame."""

    def __init__(self, t, u1, u2, dt, record_stride, params, frame_delta_omega,
                 seed=None):
        self.t = t
        self.u1 = u1  # (n, n_samples)
        self.u2 = u2
        self.dt = dt
        self.record_stride = record_stride
        self.params = params
        self.frame_delta_omega = frame_delta_omega
        self.seed = seed

    @property
    def n_members(self):
        return self.u1.shape[0]

    @cached_property
    def phi1(self):
        framed = self.u1 * np.exp(-1j * self.frame_delta_omega * self.t)
        return np.unwrap(np.angle(framed), axis=-1)

    @cached_property
    def phi2(self):
        framed = self.u2 * np.exp(1j * self.frame_delta_omega * self.t)
        return np.unwrap(np.angle(framed), axis=-1)

    @property
    def phi_plus(self):
        return self.phi1 + self.phi2

    @property
    def phi_minus(self):
        return self.phi1 - self.phi2

    def member(self, i: int) -> Trajectory:
        return Trajectory(self.t, self.u1[i].copy(), self.u2[i].copy(),
                          self.dt, self.record_stride, self.params,
                          self.frame_delta_omega, self.seed)


def _segment_plan(schedule, t0, dt, n_steps, theta_default):
    """Snap schedule changes to the step grid; yield (k_start, k_end, theta)."""
    if schedule is None:
        return [(0, n_steps, theta_default)]
    breaks = [0]
    for tc in schedule.times:
        k = int(round((tc - t0) / dt))
        if 0 < k < n_steps:
            breaks.append(k)
    breaks.append(n_steps)
    breaks = sorted(set(breaks))
    plan = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        theta = schedule.value(t0 + (a + 1.0e-6) * dt)
        plan.append((a, b, theta))
    return plan


def _validate_step(p: SystemParams, dt: float):
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidParams("dt must be finite and > 0")
    scale = max(p.gamma2_damp, abs(p.delta_f))
    if dt * scale > STEP_BOUND * (1 + 1e-12):
        raise StepTooLarge(
            f"dt*max(gamma2, |delta_f|) = {dt * scale:.3e} exceeds {STEP_BOUND:.0e}; "
            f"need dt <= {STEP_BOUND / scale:.3e}")


def integrate_slowflow(p: SystemParams, init=None, schedule=None, noise=None,
                       tspan=(0.0, 1.0), dt=None, record_stride=1) -> Trajectory:
    """Integrate one realization of the envelope equations.

    init defaults to the stationary self-oscillation point.  A literally
    zero initial state without noise is rejected: the origin is invariant,
    so the run would measure nothing.
    """
    ens = integrate_ensemble(p, None if init is None else np.asarray([init]),
                             schedule, noise, tspan, dt, record_stride)
    return ens.member(0)


def integrate_ensemble(p: SystemParams, inits=None, schedule=None, noise=None,
                       tspan=(0.0, 1.0), dt=None, record_stride=1,
                       n_members=None) -> EnsembleTrajectory:
    """Integrate many realizations sharing parameters and noise config.

    inits : (n, 2) complex initial envelopes, or None for n_members copies
    of the stationary point (n_members defaults to 1).  Noise realizations
    differ across members; the stream is drawn from noise.seed alone.
    """
    t0, t1 = float(tspan[0]), float(tspan[1])
    if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
        raise InvalidParams("tspan must be finite with t1 > t0")
    if dt is None:
        dt = default_dt(p)
    _validate_step(p, dt)
    record_stride = int(record_stride)
    if record_stride < 1:
        raise InvalidParams("record_stride must be >= 1")

    n_steps = max(1, int(round((t1 - t0) / dt)))

    if inits is None:
        n = 1 if n_members is None else int(n_members)
        ss = stationary_state(p)
        u0 = np.full((n, 2), 0.0, dtype=np.complex128)
        th0 = schedule.value(t0) if schedule is not None else p.theta_f
        # split the stationary sum phase evenly; only phi1+phi2 is pinned
        ph = 0.5 * (ss.phi_plus_0 + (th0 - p.theta_f))
        u0[:, 0] = ss.r1_0 * np.exp(1j * ph)
        u0[:, 1] = ss.r2_0 * np.exp(1j * ph)
    else:
        u0 = np.array(inits, dtype=np.complex128)
        if u0.ndim != 2 or u0.shape[1] != 2:
            raise InvalidParams("inits must have shape (n, 2)")
        if n_members is not None and u0.shape[0] != n_members:
            raise InvalidParams("n_members disagrees with inits")
    n = u0.shape[0]

    noise_on = noise is not None and noise.active
    if not noise_on and np.all(np.abs(u0) == 0) and (p.f1 > 0 or p.f2 > 0):
        raise InvalidParams(
            "zero initial state without noise never leaves the origin")

    n_rec = n_steps // record_stride + 1
    if n_rec * n > 50_000_000:
        raise InvalidParams("requested output too large; raise record_stride")

    rng = np.random.default_rng(noise.seed) if noise_on else None
    sig1 = np.sqrt(noise.d1 * dt) if noise_on else 0.0
    sig2 = np.sqrt(noise.d2 * dt) if noise_on else 0.0

    out = np.empty((n_rec, n, 2), dtype=np.complex128)
    out[0] = u0
    u = u0.copy()
    rec_done = 1

    chunk_cap = max(1024, _CHUNK_BYTES // (32 * max(n, 1)))
    plan = _segment_plan(schedule, t0, dt, n_steps, p.theta_f)
    for k_start, k_end, theta in plan:
        c1, c2, a11, a12, a22, a21, d1, d2 = _coeffs(p, theta)
        k = k_start
        while k < k_end:
            m = min(chunk_cap, k_end - k)
            if noise_on:
                xi = rng.standard_normal((m, n, 4))
            else:
                xi = np.zeros((m, 0, 4))
            n_new = _kernels.rk4_ensemble_chunk(
                u, dt, c1, c2, a11, a12, a22, a21, d1, d2,
                sig1, sig2, xi, out[rec_done:], record_stride, k)
            rec_done += n_new
            k += m
            if not np.all(np.isfinite(u.view(np.float64))):
                bad = ~np.all(np.isfinite(out[:rec_done].view(np.float64)),
                              axis=(1, 2))
                i_bad = int(np.argmax(bad)) if bad.any() else rec_done - 1
                t_bad = t0 + i_bad * record_stride * dt
                raise NonFinite(
                    f"state left the finite domain near t = {t_bad:.6g} s",
                    t_bad=t_bad)

    t = t0 + dt * record_stride * np.arange(n_rec)
    seed = noise.seed if noise_on else None
    return EnsembleTrajectory(t, out[:, :, 0].T.copy(), out[:, :, 1].T.copy(),
                              dt, record_stride, p, _frame_delta_omega(p), seed)


def stationary_theta0(p: SystemParams) -> float:
    """Stationary sum phase offset: phi_plus at theta_F = 0."""
    return stationary_state(p).phi_plus_0 - p.theta_f
