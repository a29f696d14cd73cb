"""Post-processing: diffusion statistics, spectra, fits and sweeps.

Everything here is deterministic given its input data; no hidden RNG.
Phase statistics are computed on increments rather than absolute phases
so that a shared initial transient cannot masquerade as correlation.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .errors import (BelowThreshold, DegenerateData, InsufficientResolution,
                     InvalidParams, NonUniformSampling, TooShort,
                     ZeroStateStable)
from .params import (PumpCalibration, SystemParams, derive_constants,
                     pump_map, stationary_state, zero_state_stable)
from .stability import build_jacobian, eigensystem

# increments below this variance (rad^2) are integrator round-off, not
# noise; correlation coefficients are meaningless there
VAR_FLOOR = 1e-20

# reference value for the quartic mode-mode coupling constant
# (kg rad^2 s^-2 m^-2), used as ground truth in synthetic fit studies
GAMMA_DISPERSIVE_REF = 6.41e12

MIN_DIFFUSION_SAMPLES = 1000


def _check_uniform(t):
    dt = np.diff(t)
    if dt.size == 0:
        raise TooShort("need at least two samples")
    step = dt[0]
    if step <= 0 or np.any(np.abs(dt - step) > 1e-6 * step):
        raise NonUniformSampling("sample times are not uniformly spaced")
    return step


def _lag_grid(n_samples, n_lags, max_fraction):
    kmax = max(1, int(n_samples * max_fraction))
    ks = np.unique(np.round(np.geomspace(1, kmax, n_lags)).astype(int))
    return ks[ks >= 1]


@dataclass(frozen=True)
class DiffusionStats:
    """Lag-resolved increment variances and increment correlation.

    Variances are pooled over realizations when the input is an
    ensemble.  rho is the correlation coefficient of single-sample
    increments of the two mode phases over the full record; degenerate
    marks records whose increment variance sits at numerical round-off,
    where rho carries no information (reported as nan, not an error).
    """

    lags: np.ndarray
    var_dphi1: np.ndarray
    var_dphi2: np.ndarray
    var_dplus: np.ndarray
    var_dminus: np.ndarray
    rho_lags: np.ndarray
    rho: float
    degenerate: bool
    n_samples: int
    n_realizations: int
    sample_period: float


def phase_diffusion_stats(rec, lags=None, n_lags=24,
                          max_fraction=0.25) -> DiffusionStats:
    """Increment statistics of a phase record.

    rec needs attributes t, phi1, phi2 (a PhaseRecord, a Trajectory or an
    ensemble; phi arrays may be 1-d or (n_realizations, n_samples)).

    The increment correlation is lag dependent: below the sum-phase
    pinning time 1/(Gamma_1+Gamma_2) the two phases are kicked
    independently and rho is near zero; anti-correlation develops once
    the restoring force has acted, so the headline rho is taken at the
    longest lag of the grid.
    """
    t = np.asarray(rec.t, dtype=float)
    phi1 = np.atleast_2d(np.asarray(rec.phi1, dtype=float))
    phi2 = np.atleast_2d(np.asarray(rec.phi2, dtype=float))
    if phi1.shape != phi2.shape or phi1.shape[1] != t.size:
        raise InvalidParams("phase arrays and time axis disagree in shape")
    n = t.size
    if n < MIN_DIFFUSION_SAMPLES:
        raise TooShort(
            f"{n} samples < {MIN_DIFFUSION_SAMPLES}; lag variances would "
            "be dominated by estimator noise")
    step = _check_uniform(t)

    if lags is None:
        ks = _lag_grid(n, n_lags, max_fraction)
    else:
        ks = np.asarray(lags, dtype=int)
        if ks.size == 0 or np.any(ks < 1) or np.any(ks >= n):
            raise InvalidParams("lags must be integers in [1, n_samples)")

    plus = phi1 + phi2
    minus = phi1 - phi2
    out = np.empty((4, ks.size))
    for i, x in enumerate((phi1, phi2, plus, minus)):
        for j, k in enumerate(ks):
            d = x[:, k:] - x[:, :-k]
            out[i, j] = np.var(d)

    degenerate = bool(out[0, -1] < VAR_FLOOR and out[1, -1] < VAR_FLOOR)
    rho_lags = np.full(ks.size, np.nan)
    if not degenerate:
        for j, k in enumerate(ks):
            d1 = (phi1[:, k:] - phi1[:, :-k]).ravel()
            d2 = (phi2[:, k:] - phi2[:, :-k]).ravel()
            rho_lags[j] = np.corrcoef(d1, d2)[0, 1]
    rho = float(rho_lags[-1])

    return DiffusionStats(
        lags=ks * step, var_dphi1=out[0], var_dphi2=out[1],
        var_dplus=out[2], var_dminus=out[3], rho_lags=rho_lags, rho=rho,
        degenerate=degenerate, n_samples=n,
        n_realizations=phi1.shape[0], sample_period=step)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Averaged-periodogram PSD with its resolution bookkeeping.

    freq is in Hz; psd has units signal^2/Hz (density).  One-sided for
    real input, two-sided centered on zero for complex envelopes.
    parseval_ratio compares the integrated PSD to the mean per-segment
    variance and must stay within 1% of unity.
    """

    freq: np.ndarray
    psd: np.ndarray
    rbw: float
    enbw: float
    parseval_ratio: float
    onesided: bool
    window: str
    nperseg: int


def spectrum(x, sample_period=None, t=None, nperseg=None,
             window="hann", overlap=0.5) -> SpectrumEstimate:
    """Welch PSD of a quadrature or phase signal."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise InvalidParams("signal must be one-dimensional")
    if (sample_period is None) == (t is None):
        raise InvalidParams("give exactly one of sample_period or t")
    if t is not None:
        t = np.asarray(t, dtype=float)
        if t.size != x.size:
            raise InvalidParams("t and signal lengths differ")
        sample_period = _check_uniform(t)
    if sample_period <= 0:
        raise InvalidParams("sample_period must be positive")
    n = x.size
    if n < 16:
        raise TooShort("need at least 16 samples for a spectrum")
    if nperseg is None:
        nperseg = max(16, min(n, 1 << int(np.log2(max(n // 8, 16)))))
    nperseg = int(min(nperseg, n))
    noverlap = int(nperseg * overlap)
    fs = 1.0 / sample_period

    onesided = not np.iscomplexobj(x)
    freq, psd = sps.welch(x, fs=fs, window=window, nperseg=nperseg,
                          noverlap=noverlap, detrend="constant",
                          return_onesided=onesided, scaling="density")
    if not onesided:
        order = np.argsort(freq)
        freq, psd = freq[order], psd[order]

    # integrated PSD vs mean detrended variance of the same segments
    w = sps.get_window(window, nperseg)
    step = nperseg - noverlap
    n_seg = 1 + (n - nperseg) // step
    seg_var = 0.0
    for s in range(n_seg):
        seg = x[s * step: s * step + nperseg]
        seg = seg - seg.mean()
        seg_var += np.mean(np.abs(seg) ** 2)
    seg_var /= n_seg
    # rectangular sum is the exact discrete Parseval for welch bins
    total = np.sum(psd) * (freq[1] - freq[0]) if freq.size > 1 else np.nan
    ratio = float(total / seg_var) if seg_var > 0 else np.nan

    enbw = fs * np.sum(w ** 2) / np.sum(w) ** 2
    return SpectrumEstimate(
        freq=freq, psd=psd, rbw=fs / nperseg, enbw=float(enbw),
        parseval_ratio=ratio, onesided=onesided, window=window,
        nperseg=nperseg)


def linewidth(est: SpectrumEstimate) -> float:
    """Full width at half maximum of the PSD peak, in Hz.

    Crossing points are found by linear interpolation around the peak;
    the width of an unbroadened tone comes out near the window main-lobe
    width (about 1.4 bins for hann), never below one bin.
    """
    psd = est.psd
    ip = int(np.argmax(psd))
    half = psd[ip] / 2.0
    if psd[ip] <= 0:
        raise InsufficientResolution("spectrum has no positive peak")

    left = None
    for i in range(ip, 0, -1):
        if psd[i - 1] < half <= psd[i]:
            f0, f1 = est.freq[i - 1], est.freq[i]
            p0, p1 = psd[i - 1], psd[i]
            left = f0 + (half - p0) * (f1 - f0) / (p1 - p0)
            break
    right = None
    for i in range(ip, psd.size - 1):
        if psd[i + 1] < half <= psd[i]:
            f0, f1 = est.freq[i], est.freq[i + 1]
            p0, p1 = psd[i], psd[i + 1]
            right = f0 + (half - p0) * (f1 - f0) / (p1 - p0)
            break
    if left is None or right is None:
        raise InsufficientResolution(
            "half-power crossings not bracketed by the frequency grid")
    width = float(right - left)
    if width < est.rbw:
        raise InsufficientResolution(
            f"apparent width {width:.3g} Hz is below the resolution "
            f"bandwidth {est.rbw:.3g} Hz")
    return width


def ssb_phase_noise(est: SpectrumEstimate, offsets_hz) -> np.ndarray:
    """Single-sideband phase noise L(f) = S_phi/2 in dBc/Hz at offsets.

    est must be the spectrum of a phase signal in radians (one-sided).
    """
    if not est.onesided:
        raise InvalidParams("phase-noise conversion expects a real "
                            "phase signal (one-sided PSD)")
    offsets = np.atleast_1d(np.asarray(offsets_hz, dtype=float))
    fmin = est.freq[1] if est.freq.size > 1 else np.inf
    fmax = est.freq[-1]
    if np.any(offsets < fmin) or np.any(offsets > fmax):
        raise InsufficientResolution(
            f"offsets outside the resolved band [{fmin:.3g}, {fmax:.3g}] Hz")
    s = np.interp(offsets, est.freq, est.psd)
    if np.any(s <= 0):
        raise InsufficientResolution("PSD vanishes at a requested offset")
    return 10.0 * np.log10(s / 2.0)


@dataclass(frozen=True)
class DispersiveFit:
    """Through-origin fit of frequency shift vs squared amplitude."""

    gamma: float
    slope: float
    residual_rms: float
    n_points: int


def fit_dispersive_coupling(amp_sq, domega, mass, omega) -> DispersiveFit:
    """Quartic coupling constant from shift-vs-amplitude data.

    amp_sq: squared drive amplitudes of the other mode (m^2); domega:
    resonance shifts of the observed mode (rad/s).  The interaction
    energy gamma*q_a^2*q_b^2/2 adds mean stiffness gamma*A^2/2, so the
    shift is gamma*A^2/(4*m*omega) and gamma = 4*m*omega*slope.  The sign
    follows the data; shifts entered as magnitudes give |gamma|.
    """
    x = np.asarray(amp_sq, dtype=float)
    y = np.asarray(domega, dtype=float)
    if x.size != y.size or x.size < 2:
        raise InvalidParams("need at least two (A^2, shift) pairs")
    if np.any(x <= 0):
        raise InvalidParams("squared amplitudes must be positive")
    if not (mass > 0 and omega > 0):
        raise InvalidParams("mass and omega must be positive")
    if np.ptp(x) == 0.0:
        raise DegenerateData("all squared amplitudes identical; slope "
                             "through the origin is unconstrained")
    slope = float(np.dot(x, y) / np.dot(x, x))
    resid = y - slope * x
    return DispersiveFit(gamma=4.0 * mass * omega * slope, slope=slope,
                         residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                         n_points=x.size)


@dataclass(frozen=True)
class DetuneSweep:
    """Stationary amplitudes across a pump-detuning grid.

    Points below the onset carry r^2 = 0 and oscillating=False.  The
    zero_state_bistable flag marks detunings where self-oscillation
    coexists with a re-stabilized quiescent state.  Edges are reported
    at grid resolution as the first oscillating point (onset) and the
    first bistable point (restab); nan when outside the grid.
    """

    delta_f: np.ndarray
    r1_sq: np.ndarray
    r2_sq: np.ndarray
    oscillating: np.ndarray
    zero_state_bistable: np.ndarray
    onset_delta_f: float
    restab_delta_f: float
    omega_c: float


def sweep_amplitude_vs_detuning(template: SystemParams,
                                delta_f_grid) -> DetuneSweep:
    """Evaluate the stationary orbit across pump detunings."""
    grid = np.asarray(delta_f_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidParams("need a 1-d grid of at least two detunings")
    if np.any(np.diff(grid) <= 0):
        raise InvalidParams("detuning grid must be strictly increasing")
    dc = derive_constants(template)
    wc = dc.omega_c
    if grid[0] <= -2 * wc or grid[-1] >= 2 * wc:
        raise InvalidParams(
            f"grid must stay inside (-2 omega_c, 2 omega_c) = "
            f"(+-{2 * wc:.6g} rad/s)")

    r1 = np.zeros(grid.size)
    r2 = np.zeros(grid.size)
    osc = np.zeros(grid.size, dtype=bool)
    bist = np.zeros(grid.size, dtype=bool)
    for i, d in enumerate(grid):
        p = replace(template, delta_f=float(d))
        try:
            ss = stationary_state(p)
        except (BelowThreshold, ZeroStateStable):
            continue
        r1[i] = ss.r1_0 ** 2
        r2[i] = ss.r2_0 ** 2
        osc[i] = True
        bist[i] = zero_state_stable(p)

    onset = grid[osc][0] if osc.any() else np.nan
    both = osc & bist
    restab = grid[both][0] if both.any() else np.nan
    return DetuneSweep(delta_f=grid, r1_sq=r1, r2_sq=r2, oscillating=osc,
                       zero_state_bistable=bist,
                       onset_delta_f=float(onset),
                       restab_delta_f=float(restab), omega_c=wc)


@dataclass(frozen=True)
class PumpSweep:
    """Slow relaxation eigenvalue across a pump-current grid."""

    currents: np.ndarray
    lam3: np.ndarray
    xi: np.ndarray
    below_threshold: np.ndarray
    delta_f: float


def sweep_lambda3_vs_pump(template: SystemParams, cal: PumpCalibration,
                          currents, delta_f: float = 0.0) -> PumpSweep:
    """lambda_3 vs pump current at fixed detuning.

    Sub-threshold points (Xi <= 1 or detuning below onset) are flagged
    and carry nan rather than aborting the sweep.
    """
    cur = np.asarray(currents, dtype=float)
    if cur.ndim != 1 or cur.size == 0:
        raise InvalidParams("need a 1-d array of currents")
    if np.any(cur < 0):
        raise InvalidParams("currents must be >= 0")

    base = replace(template, delta_f=float(delta_f))
    lam3 = np.full(cur.size, np.nan)
    xi = np.zeros(cur.size)
    below = np.ones(cur.size, dtype=bool)
    for i, amp in enumerate(cur):
        p = pump_map(float(amp), cal, base)
        try:
            dc = derive_constants(p)
            xi[i] = dc.xi
            lam3[i] = eigensystem(build_jacobian(p)).lam[2].real
            below[i] = False
        except (BelowThreshold, ZeroStateStable):
            continue
    return PumpSweep(currents=cur, lam3=lam3, xi=xi,
                     below_threshold=below, delta_f=float(delta_f))
