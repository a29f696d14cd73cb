"""Discrete pump-phase feedback stabilizing one mode's phase.

Each cycle holds theta_F fixed, waits t_wait for the transient from the
previous update to die out, averages the measured phase of the OTHER mode
over t_measure, and commands the next pump phase:

    target mode 2:  theta' = (phi1_meas - (1-g) theta) / g
    target mode 1:  theta' = (phi2_meas - g theta) / (1-g)

Because phi1 + phi2 is pinned to theta_F (up to constants zeroed at run
start), either law drives the target mode's settled phase to zero; the
price is that theta_F inherits the measured error amplified by 1/g or
1/(1-g), performing a random walk when noise is present.

Timing is quantized to detector ticks: theta updates take effect exactly
at a tick boundary, and the first measurement sample of a cycle is the
first tick at or after t_p + t_wait (zero residual jitter by design).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .detection import DetectionModel
from .errors import (AmplitudeCollapse, ExcursionWarning,
                     InsufficientResolution, InvalidParams, NonFinite,
                     TooShort, UnwrapFault)
from .params import SystemParams, stationary_state
from .slowflow import NoiseConfig, _coeffs, _validate_step, default_dt
from .stability import build_jacobian, eigensystem

G_MARGIN = 1.0e-3
COLLAPSE_FRACTION = 0.2


@dataclass(frozen=True)
class CycleConfig:
    """Feedback cycle timing and the split constant it relies on."""

    t_measure: float
    target_mode: int
    g: float
    t_wait: float = 0.3
    theta_limit: float = np.deg2rad(20.0)
    clamp: bool = False

    def __post_init__(self):
        if self.target_mode not in (1, 2):
            raise InvalidParams("target_mode must be 1 or 2")
        if not (np.isfinite(self.t_wait) and self.t_wait > 0):
            raise InvalidParams("t_wait must be finite and > 0")
        if not (np.isfinite(self.t_measure) and self.t_measure > 0):
            raise InvalidParams("t_measure must be finite and > 0")
        if not (G_MARGIN < self.g < 1.0 - G_MARGIN):
            raise InvalidParams(
                f"g = {self.g} outside ({G_MARGIN}, {1 - G_MARGIN}); "
                "both control laws degenerate at the edges")
        if self.theta_limit <= 0:
            raise InvalidParams("theta_limit must be > 0")


def theta_next_mode2(theta: float, phi1_meas: float, g: float) -> float:
    return (phi1_meas - (1.0 - g) * theta) / g


def theta_next_mode1(theta: float, phi2_meas: float, g: float) -> float:
    return (phi2_meas - g * theta) / (1.0 - g)


class SlowFlowPlant:
    """Envelope integrator wrapped as a sequential feedback plant.

    Holds params, process noise and the step size; a stabilization run
    resets it against a DetectionModel, which fixes the tick grid (the
    detector cadence snapped to a whole number of integrator steps).
    """

    def __init__(self, params: SystemParams, noise: NoiseConfig = None,
                 dt: float = None):
        if dt is None:
            dt = default_dt(params)
        _validate_step(params, dt)
        self.params = params
        self.noise = noise
        self.dt = float(dt)
        self.stationary = stationary_state(params)
        self.frame_delta_omega = self.stationary.delta_omega
        self._state = None

    def reset(self, det: DetectionModel):
        if self.dt > det.tau_lockin / 10.0 * (1 + 1e-9):
            raise InsufficientResolution(
                f"plant dt {self.dt:.3e} s too coarse for the "
                f"{det.tau_lockin:.3e} s lock-in filter; need dt <= tau/10")
        spt = int(round(det.sample_period / self.dt))
        if spt < 1:
            raise InvalidParams("sample_period shorter than one step")
        self.det = det
        self.steps_per_tick = spt
        self.sample_period_eff = spt * self.dt
        self.alpha = 1.0 - np.exp(-self.dt / det.tau_lockin)
        self.rotstep = complex(np.cos(self.frame_delta_omega * self.dt),
                               -np.sin(self.frame_delta_omega * self.dt))

        ss = self.stationary
        ph = 0.5 * ss.phi_plus_0
        u1 = ss.r1_0 * np.exp(1j * ph)
        u2 = ss.r2_0 * np.exp(1j * ph)
        self._state = np.array([u1, u2, u1, u2, 1.0 + 0.0j],
                               dtype=np.complex128)
        self.theta = self.params.theta_f
        self._coeff_cache = {}
        self.steps_done = 0
        noise_on = self.noise is not None and self.noise.active
        self._rng = np.random.default_rng(self.noise.seed) if noise_on else None
        self._sig = (np.sqrt(self.noise.d1 * self.dt),
                     np.sqrt(self.noise.d2 * self.dt)) if noise_on else (0.0, 0.0)

    def set_theta(self, theta: float):
        if not np.isfinite(theta):
            raise InvalidParams("theta must be finite")
        self.theta = float(theta)

    def _coeffs_for(self, theta):
        c = self._coeff_cache.get(theta)
        if c is None:
            c = _coeffs(self.params, theta)
            if len(self._coeff_cache) > 64:
                self._coeff_cache.clear()
            self._coeff_cache[theta] = c
        return c

    def advance_ticks(self, n_ticks: int):
        """Run n_ticks detector periods; return (z, v) samples, (n,2)."""
        if self._state is None:
            raise InvalidParams("plant not reset against a detector")
        spt = self.steps_per_tick
        n_steps = n_ticks * spt
        c1, c2, a11, a12, a22, a21, d1, d2 = self._coeffs_for(self.theta)
        out_z = np.empty((n_ticks, 2), dtype=np.complex128)
        out_v = np.empty((n_ticks, 2), dtype=np.complex128)
        done = 0
        filled = 0
        chunk = 1 << 19
        empty = np.empty((0, 4))
        while done < n_steps:
            m = min(chunk, n_steps - done)
            if self._rng is not None:
                xi = self._rng.standard_normal((m, 4))
            else:
                xi = empty
            local = self.steps_done + done
            first = spt - 1 - (local % spt)
            count = (local + m) // spt - local // spt
            sample_steps = (first + spt * np.arange(count)).astype(np.int64)
            got = _kernels.plant_chunk(
                self._state, m, self.dt, c1, c2, a11, a12, a22, a21, d1, d2,
                self._sig[0], self._sig[1], xi, self.alpha, self.rotstep,
                sample_steps, out_z[filled:], out_v[filled:])
            filled += got
            done += m
            if not np.all(np.isfinite(self._state.view(np.float64))):
                raise NonFinite(
                    "plant state overflowed",
                    t_bad=(self.steps_done + done) * self.dt)
        self.steps_done += n_steps
        return out_z, out_v


@dataclass(frozen=True)
class StabilizationRun:
    """Per-cycle and per-tick record of one feedback run.

    theta[p] is the pump phase in force during cycle p.  Phases are
    referenced so phi1 = phi2 = 0 and theta = theta(0) at run start.
    eps[p] = theta[p] - phi_meas[p] is the measured phase error of the
    target mode (exact when measurement noise is off).
    """

    target_mode: int
    enabled: bool
    theta: np.ndarray
    phi_meas: np.ndarray
    eps: np.ndarray
    phi1_end: np.ndarray
    phi2_end: np.ndarray
    r1_end: np.ndarray
    r2_end: np.ndarray
    t_ticks: np.ndarray
    phi1_ticks: np.ndarray
    phi2_ticks: np.ndarray
    cycle_of_tick: np.ndarray
    jump_flags: np.ndarray
    n_wait_ticks: int
    n_meas_ticks: int
    sample_period: float
    g: float
    excursion_count: int
    config: CycleConfig
    detection: DetectionModel

    @property
    def n_cycles(self) -> int:
        return self.theta.size

    @property
    def stabilized_phase_ticks(self) -> np.ndarray:
        return self.phi2_ticks if self.target_mode == 2 else self.phi1_ticks

    @property
    def ticks_per_cycle(self) -> int:
        return self.n_wait_ticks + self.n_meas_ticks


def _continue_phase(prev, raw):
    """Nearest-branch continuation of raw angles onto a running phase."""
    out = np.empty(raw.size)
    for i, r in enumerate(raw):
        step = r - prev
        step = (step + np.pi) % (2 * np.pi) - np.pi
        prev = prev + step
        out[i] = prev
    return out


def _stabilize(plant, det, cfg, n_cycles, enabled, det_seed, theta0):
    n_cycles = int(n_cycles)
    if n_cycles < 1:
        raise InvalidParams("need at least one cycle")

    t_r = eigensystem(build_jacobian(plant.params)).t_relax
    if cfg.t_wait < t_r * (1 - 1e-9):
        raise InvalidParams(
            f"t_wait = {cfg.t_wait:.3g} s below the relaxation time "
            f"{t_r:.3g} s of this operating point")

    plant.reset(det)
    if theta0 != 0.0:
        plant.set_theta(plant.params.theta_f + theta0)
    ts = plant.sample_period_eff
    if cfg.t_measure < ts * (1 - 1e-9):
        raise InvalidParams(
            f"t_measure = {cfg.t_measure:.3g} s is shorter than one "
            f"detector sample ({ts:.3g} s)")
    n_wait = max(1, int(np.ceil(cfg.t_wait / ts - 1e-9)))
    n_meas = max(1, int(round(cfg.t_measure / ts)))
    meas_mode = 1 if cfg.target_mode == 2 else 2
    sigma = det.sigma_det1 if meas_mode == 1 else det.sigma_det2
    rng_det = np.random.default_rng(det_seed)

    r_floor = (COLLAPSE_FRACTION * plant.stationary.r1_0,
               COLLAPSE_FRACTION * plant.stationary.r2_0)

    # reference offsets so reported phases start at zero
    ph0 = 0.5 * plant.stationary.phi_plus_0
    off = (ph0, ph0)

    tpc = n_wait + n_meas
    theta_log = np.empty(n_cycles)
    phi_meas_log = np.empty(n_cycles)
    eps_log = np.empty(n_cycles)
    phi_end = np.empty((n_cycles, 2))
    r_end = np.empty((n_cycles, 2))
    phi_ticks = np.empty((n_cycles * tpc, 2))
    jump_flags = np.zeros((n_cycles * tpc, 2), dtype=bool)
    cycle_of_tick = np.repeat(np.arange(n_cycles), tpc)

    last_true = [0.0, 0.0]
    last_meas = 0.0
    excursions = 0
    warned = False
    theta = plant.theta

    for p in range(n_cycles):
        theta_log[p] = theta
        zw, vw = plant.advance_ticks(n_wait)
        zm, vm = plant.advance_ticks(n_meas)

        v_all = np.vstack([vw, vm])
        base = p * tpc
        for m in (0, 1):
            tr = _continue_phase(last_true[m] + off[m],
                                 np.angle(v_all[:, m]))
            steps = np.diff(np.concatenate([[last_true[m] + off[m]], tr]))
            # post-update transients may legitimately move fast; flag,
            # do not abort -- control only reads the measure window
            jump_flags[base:base + tpc, m] = np.abs(steps) > 0.5 * np.pi
            phi_ticks[base:base + tpc, m] = tr - off[m]
            last_true[m] = tr[-1] - off[m]

        z_meas = zm[:, meas_mode - 1]
        if sigma > 0:
            xi = rng_det.standard_normal((n_meas, 2))
            z_meas = z_meas + sigma * (xi[:, 0] + 1j * xi[:, 1])
        start = last_meas + off[meas_mode - 1]
        ph_m = _continue_phase(start, np.angle(z_meas))
        if np.any(np.abs(np.diff(ph_m)) > 0.5 * np.pi):
            raise UnwrapFault(
                f"measured mode-{meas_mode} phase jumped more than pi/2 "
                f"within the cycle-{p} measurement window")
        last_meas = ph_m[-1] - off[meas_mode - 1]
        phi_tilde = float(np.mean(ph_m)) - off[meas_mode - 1]

        phi_meas_log[p] = phi_tilde
        eps_log[p] = theta - plant.params.theta_f - phi_tilde
        phi_end[p, 0] = phi_ticks[base + tpc - 1, 0]
        phi_end[p, 1] = phi_ticks[base + tpc - 1, 1]
        r_end[p, 0] = np.abs(vm[-1, 0])
        r_end[p, 1] = np.abs(vm[-1, 1])
        if r_end[p, 0] < r_floor[0] or r_end[p, 1] < r_floor[1]:
            raise AmplitudeCollapse(
                f"amplitude fell below {COLLAPSE_FRACTION:.0%} of the "
                f"stationary orbit in cycle {p}; the zero state captured "
                "the dynamics", cycle=p)

        if enabled and p < n_cycles - 1:
            rel = theta - plant.params.theta_f
            if cfg.target_mode == 2:
                rel_next = theta_next_mode2(rel, phi_tilde, cfg.g)
            else:
                rel_next = theta_next_mode1(rel, phi_tilde, cfg.g)
            if not np.isfinite(rel_next):
                raise NonFinite(
                    f"control law diverged by cycle {p}; if this is the "
                    "1/(1-g) law, t_wait probably leaves a settling tail "
                    "larger than (1-g)/g")
            if abs(rel_next) > cfg.theta_limit:
                excursions += 1
                if not warned:
                    warnings.warn(
                        f"pump phase excursion {rel_next:.3f} rad beyond "
                        f"{cfg.theta_limit:.3f} rad at cycle {p}",
                        ExcursionWarning, stacklevel=3)
                    warned = True
                if cfg.clamp:
                    rel_next = np.clip(rel_next, -cfg.theta_limit,
                                       cfg.theta_limit)
            theta = plant.params.theta_f + rel_next
            plant.set_theta(theta)

    t_ticks = ts * (1 + np.arange(n_cycles * tpc))
    return StabilizationRun(
        target_mode=cfg.target_mode, enabled=enabled,
        theta=theta_log - plant.params.theta_f,
        phi_meas=phi_meas_log, eps=eps_log,
        phi1_end=phi_end[:, 0], phi2_end=phi_end[:, 1],
        r1_end=r_end[:, 0], r2_end=r_end[:, 1],
        t_ticks=t_ticks, phi1_ticks=phi_ticks[:, 0],
        phi2_ticks=phi_ticks[:, 1], cycle_of_tick=cycle_of_tick,
        jump_flags=jump_flags, n_wait_ticks=n_wait, n_meas_ticks=n_meas,
        sample_period=ts, g=cfg.g, excursion_count=excursions,
        config=cfg, detection=det)


def stabilize_mode2(plant: SlowFlowPlant, det: DetectionModel,
                    cfg: CycleConfig, n_cycles: int, enabled: bool = True,
                    det_seed: int = 0,
                    theta0: float = 0.0) -> StabilizationRun:
    """Stabilize mode 2's phase by measuring mode 1.

    theta0 offsets the pump phase at t = 0 away from the value the plant
    was prepared at; the loop must then pull the mode-2 phase back to
    zero (one cycle when noiseless).  enabled=False runs the identical
    cycle clock and consumes the identical noise streams without ever
    updating theta_F, giving the paired free-diffusion reference.
    """
    if cfg.target_mode != 2:
        raise InvalidParams("cfg.target_mode must be 2")
    return _stabilize(plant, det, cfg, n_cycles, enabled, det_seed, theta0)


def stabilize_mode1(plant: SlowFlowPlant, det: DetectionModel,
                    cfg: CycleConfig, n_cycles: int, enabled: bool = True,
                    det_seed: int = 0,
                    theta0: float = 0.0) -> StabilizationRun:
    """Stabilize mode 1's phase by measuring mode 2.

    The update multiplier is 1/(1-g) instead of 1/g, so with g near 1 the
    commanded pump-phase excursions are larger by about g/(1-g); prefer
    operating points with Delta_F < omega_c so a kicked trajectory cannot
    be captured by a stable zero state (capture raises AmplitudeCollapse).

    Unlike the mode-2 law, this loop amplifies any unsettled transient by
    1/(1-g) each cycle, so it is only stable when the slow tail has
    decayed below roughly (1-g)/g by measurement time: choose
    t_wait >~ t_r * ln(g/(1-g)), noticeably stricter than the t_r floor.
    """
    if cfg.target_mode != 1:
        raise InvalidParams("cfg.target_mode must be 1")
    return _stabilize(plant, det, cfg, n_cycles, enabled, det_seed, theta0)


@dataclass(frozen=True)
class ControllerStats:
    """Summary statistics of a stabilization run."""

    sigma_phi: float
    theta_walk_rate: float
    predicted_walk_rate: float
    mean_eps_sq: float
    var_ratio_vs_baseline: float
    n_cycles: int
    skip_cycles: int


def controller_statistics(run: StabilizationRun,
                          baseline: StabilizationRun = None,
                          skip: int = 5) -> ControllerStats:
    """RMS stabilized phase, theta random-walk rate, on/off ratio.

    The first ``skip`` cycles are excluded from every estimate (initial
    transient).  theta_walk_rate is the mean squared per-cycle increment
    of theta_F; for white per-cycle errors eps it should match
    <eps^2>/g^2 (mode 2) or <eps^2>/(1-g)^2 (mode 1).
    """
    if run.n_cycles < 100:
        raise TooShort(
            f"{run.n_cycles} cycles < 100; variance estimates unreliable")
    if not (0 <= skip < run.n_cycles - 1):
        raise InvalidParams("skip out of range")

    sel = run.cycle_of_tick >= skip
    ph = run.stabilized_phase_ticks[sel]
    sigma_phi = float(np.sqrt(np.mean(ph ** 2)))

    dth = np.diff(run.theta[skip:])
    walk = float(np.mean(dth ** 2)) if dth.size else 0.0
    eps2 = float(np.mean(run.eps[skip:] ** 2))
    denom = run.g if run.target_mode == 2 else 1.0 - run.g
    predicted = eps2 / denom ** 2

    ratio = np.nan
    if baseline is not None:
        if baseline.n_cycles != run.n_cycles:
            raise InvalidParams("baseline run length differs")
        base = baseline.phi2_ticks if run.target_mode == 2 \
            else baseline.phi1_ticks
        v_on = np.var(ph)
        v_off = np.var(base[sel])
        ratio = float(v_off / v_on) if v_on > 0 else np.inf

    return ControllerStats(
        sigma_phi=sigma_phi, theta_walk_rate=walk,
        predicted_walk_rate=predicted, mean_eps_sq=eps2,
        var_ratio_vs_baseline=float(ratio), n_cycles=run.n_cycles,
        skip_cycles=skip)
