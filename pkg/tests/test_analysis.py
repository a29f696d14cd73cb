"""Diffusion statistics, spectra and fits on synthetic known-answer data."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from pytest import approx

from twomode import (DEFAULT_CALIBRATION, GAMMA_DISPERSIVE_REF, DegenerateData,
                     InsufficientResolution, InvalidParams, NonUniformSampling,
                     TooShort, build_jacobian, eigensystem,
                     fit_dispersive_coupling, linewidth, phase_diffusion_stats,
                     spectrum, ssb_phase_noise, sweep_amplitude_vs_detuning,
                     sweep_lambda3_vs_pump)

# bench omega_c and the xi = 2 bench current; both confirmed by an
# independent solve (see tests/conftest.py) and frozen in test_params
WC = 598.5537901972918
XI2_CURRENT = 8.257560154663161e-4

STEP = 1e-3
SIGW = 0.01


def brownian_pair(seed, n_real=16, n=4000, white=0.0):
    """phi1/phi2 sharing an exact random-walk difference phase.

    phi1 - phi2 performs a random walk with per-step variance SIGW^2;
    phi1 + phi2 is zero up to the optional independent white noise.
    """
    rng = np.random.default_rng(seed)
    w = np.cumsum(rng.normal(0.0, SIGW, (n_real, n)), axis=1)
    phi1 = 0.5 * w
    phi2 = -phi1
    if white > 0:
        phi1 = phi1 + rng.normal(0.0, white, (n_real, n))
        phi2 = phi2 + rng.normal(0.0, white, (n_real, n))
    return SimpleNamespace(t=np.arange(n) * STEP, phi1=phi1, phi2=phi2)


class TestDiffusionStats:
    def test_pure_difference_walk(self):
        st = phase_diffusion_stats(brownian_pair(7))
        assert not st.degenerate
        assert st.n_realizations == 16
        assert st.rho == approx(-1.0, abs=1e-9)
        # the sum phase is identically zero
        assert np.all(st.var_dplus == 0.0)
        assert st.lags[0] == approx(STEP, rel=1e-12)
        assert st.var_dminus[0] == approx(SIGW ** 2, rel=0.05)
        # linear growth of the difference-phase variance with lag
        k_last = st.lags[-1] / st.sample_period
        assert st.var_dminus[-1] / st.var_dminus[0] == approx(k_last, rel=0.25)
        assert st.var_dphi1[0] == approx(SIGW ** 2 / 4.0, rel=0.05)

    def test_white_noise_masks_short_lag_correlation(self):
        st = phase_diffusion_stats(brownian_pair(8, white=SIGW / math.sqrt(2)))
        # single-step increments are dominated by the independent noise
        assert -0.45 < st.rho_lags[0] < -0.05
        # long lags reveal the shared walk
        assert st.rho < -0.95
        assert st.var_dplus[-1] < 0.05 * st.var_dminus[-1]
        assert st.var_dminus[-1] > 100.0 * st.var_dminus[0]

    def test_quiet_record_flagged_degenerate(self):
        rec = SimpleNamespace(t=np.arange(2000) * STEP,
                              phi1=np.zeros((1, 2000)),
                              phi2=np.zeros((1, 2000)))
        st = phase_diffusion_stats(rec)
        assert st.degenerate
        assert math.isnan(st.rho)

    def test_custom_lags(self):
        st = phase_diffusion_stats(brownian_pair(9), lags=[3, 7])
        assert st.lags == approx([3 * STEP, 7 * STEP], rel=1e-12)

    def test_errors(self):
        rec = brownian_pair(10)
        with pytest.raises(TooShort):
            phase_diffusion_stats(
                SimpleNamespace(t=rec.t[:500], phi1=rec.phi1[:, :500],
                                phi2=rec.phi2[:, :500]))
        with pytest.raises(NonUniformSampling):
            phase_diffusion_stats(
                SimpleNamespace(t=rec.t ** 1.5, phi1=rec.phi1,
                                phi2=rec.phi2))
        with pytest.raises(InvalidParams):
            phase_diffusion_stats(
                SimpleNamespace(t=rec.t, phi1=rec.phi1[:, :-1],
                                phi2=rec.phi2))
        with pytest.raises(InvalidParams):
            phase_diffusion_stats(rec, lags=[0])
        with pytest.raises(InvalidParams):
            phase_diffusion_stats(rec, lags=[5000])


FS = 1000.0
N = 1 << 15
T = np.arange(N) / FS


class TestSpectrum:
    def test_tone(self):
        est = spectrum(0.8 * np.sin(2 * np.pi * 123.3 * T),
                       sample_period=1 / FS)
        assert est.onesided
        assert est.freq[np.argmax(est.psd)] == approx(123.3, abs=est.rbw)
        assert est.parseval_ratio == approx(1.0, abs=0.01)
        # an unbroadened tone resolves at the window main-lobe width
        assert est.rbw < linewidth(est) < 2.5 * est.rbw

    def test_white_noise_level(self):
        rng = np.random.default_rng(5)
        sig = 0.5
        est = spectrum(sig * rng.standard_normal(N), sample_period=1 / FS)
        assert np.mean(est.psd[5:-5]) == approx(2 * sig ** 2 / FS, rel=0.05)
        assert est.parseval_ratio == approx(1.0, abs=0.01)

    def test_complex_envelope_two_sided(self):
        est = spectrum(np.exp(2j * np.pi * (-37.0) * T),
                       sample_period=1 / FS)
        assert not est.onesided
        assert est.freq[0] < 0 < est.freq[-1]
        assert est.freq[np.argmax(est.psd)] == approx(-37.0, abs=est.rbw)
        assert est.parseval_ratio == approx(1.0, abs=0.01)

    def test_time_axis_equivalent_to_period(self):
        x = np.sin(2 * np.pi * 50.0 * T[:4096])
        a = spectrum(x, sample_period=1 / FS)
        b = spectrum(x, t=T[:4096])
        assert np.array_equal(a.psd, b.psd)

    def test_errors(self):
        x = np.sin(T[:1024])
        with pytest.raises(InvalidParams):
            spectrum(x, sample_period=1 / FS, t=T[:1024])
        with pytest.raises(InvalidParams):
            spectrum(x)
        with pytest.raises(InvalidParams):
            spectrum(np.ones((4, 4)), sample_period=1 / FS)
        with pytest.raises(InvalidParams):
            spectrum(x, sample_period=-1.0)
        with pytest.raises(TooShort):
            spectrum(x[:8], sample_period=1 / FS)

    def test_silent_record_has_no_linewidth(self):
        est = spectrum(np.zeros(4096), sample_period=1 / FS)
        with pytest.raises(InsufficientResolution):
            linewidth(est)


class TestSsbPhaseNoise:
    def test_white_phase_noise_level(self):
        rng = np.random.default_rng(6)
        sphi = 1e-3
        est = spectrum(sphi * rng.standard_normal(N), sample_period=1 / FS)
        L = ssb_phase_noise(est, [50.0, 100.0, 200.0])
        # L(f) = S_phi/2 with S_phi = 2 sigma^2/fs
        assert L == approx(10 * np.log10(sphi ** 2 / FS), abs=2.0)

    def test_complex_input_rejected(self):
        est = spectrum(np.exp(2j * np.pi * 10.0 * T[:4096]),
                       sample_period=1 / FS)
        with pytest.raises(InvalidParams):
            ssb_phase_noise(est, [50.0])

    def test_offsets_must_be_resolved(self):
        est = spectrum(np.random.default_rng(0).standard_normal(4096),
                       sample_period=1 / FS)
        with pytest.raises(InsufficientResolution):
            ssb_phase_noise(est, [600.0])
        with pytest.raises(InsufficientResolution):
            ssb_phase_noise(est, [0.01])


class TestDispersiveFit:
    def test_exact_recovery(self):
        mass, omega = 8.15e-11, 2 * np.pi * 47030.7
        amp_sq = np.linspace(1e-18, 1e-17, 10)
        domega = GAMMA_DISPERSIVE_REF * amp_sq / (4 * mass * omega)
        fit = fit_dispersive_coupling(amp_sq, domega, mass, omega)
        assert fit.gamma == approx(GAMMA_DISPERSIVE_REF, rel=1e-12)
        assert fit.residual_rms == approx(0.0, abs=1e-12 * domega.max())
        assert fit.n_points == 10

    def test_least_squares_slope(self):
        rng = np.random.default_rng(3)
        x = np.linspace(1.0, 2.0, 20)
        y = 5.0 * x + 0.1 * rng.standard_normal(20)
        fit = fit_dispersive_coupling(x, y, 1.0, 1.0)
        ref = np.linalg.lstsq(x[:, None], y, rcond=None)[0][0]
        assert fit.slope == approx(ref, rel=1e-12)
        assert fit.residual_rms > 0

    def test_errors(self):
        with pytest.raises(InvalidParams):
            fit_dispersive_coupling([1.0], [2.0], 1.0, 1.0)
        with pytest.raises(InvalidParams):
            fit_dispersive_coupling([0.0, 1.0], [0.0, 1.0], 1.0, 1.0)
        with pytest.raises(InvalidParams):
            fit_dispersive_coupling([1.0, 2.0], [1.0, 2.0], -1.0, 1.0)
        with pytest.raises(DegenerateData):
            fit_dispersive_coupling([1.0, 1.0], [1.0, 2.0], 1.0, 1.0)


class TestDetuneSweep:
    def test_edges_and_linearity(self, desk_params):
        grid = np.linspace(-1.5 * WC, 1.5 * WC, 41)
        sw = sweep_amplitude_vs_detuning(desk_params, grid)
        assert sw.omega_c == approx(WC, rel=1e-12)

        expected_osc = grid > -WC
        assert np.array_equal(sw.oscillating, expected_osc)
        assert sw.onset_delta_f == approx(grid[expected_osc][0], rel=1e-12)
        expected_restab = grid[expected_osc & (grid >= WC)][0]
        assert sw.restab_delta_f == approx(expected_restab, rel=1e-12)
        assert np.array_equal(sw.zero_state_bistable & sw.oscillating,
                              expected_osc & (grid >= WC))

        # r1^2 grows linearly in (delta_f + omega_c) from zero at onset
        x = grid[expected_osc]
        y = sw.r1_sq[expected_osc]
        coef = np.polyfit(x, y, 1)
        assert np.abs(y - np.polyval(coef, x)).max() < 1e-10 * y.max()
        assert -coef[1] / coef[0] == approx(-WC, rel=1e-9)
        assert np.all(sw.r1_sq[~expected_osc] == 0.0)
        assert np.all(sw.r2_sq[expected_osc] > 0.0)

    def test_grid_validation(self, desk_params):
        with pytest.raises(InvalidParams):
            sweep_amplitude_vs_detuning(desk_params,
                                        np.linspace(-3 * WC, 3 * WC, 5))
        with pytest.raises(InvalidParams):
            sweep_amplitude_vs_detuning(desk_params, [100.0, 50.0])
        with pytest.raises(InvalidParams):
            sweep_amplitude_vs_detuning(desk_params, [100.0])


class TestPumpSweep:
    def test_threshold_flags(self, desk_params):
        currents = np.linspace(1e-4, 9e-4, 9)
        sw = sweep_lambda3_vs_pump(desk_params, DEFAULT_CALIBRATION,
                                   currents, delta_f=0.0)
        # xi scales linearly with current through the xi = 2 anchor
        xi_expected = 2.0 * currents / XI2_CURRENT
        assert sw.xi == approx(xi_expected, rel=1e-9)
        assert np.array_equal(sw.below_threshold, xi_expected <= 1.0)
        assert np.all(np.isnan(sw.lam3[sw.below_threshold]))
        assert np.all(sw.lam3[~sw.below_threshold] < 0.0)

    def test_matches_direct_eigenvalue(self, desk_params):
        sw = sweep_lambda3_vs_pump(desk_params, DEFAULT_CALIBRATION,
                                   [XI2_CURRENT],
                                   delta_f=desk_params.delta_f)
        direct = eigensystem(build_jacobian(desk_params)).lam[2].real
        assert sw.lam3[0] == approx(direct, rel=1e-12)
        assert sw.lam3[0] == approx(-56.72415990467303, rel=1e-9)

    def test_current_validation(self, desk_params):
        with pytest.raises(InvalidParams):
            sweep_lambda3_vs_pump(desk_params, DEFAULT_CALIBRATION, [-1e-4])
        with pytest.raises(InvalidParams):
            sweep_lambda3_vs_pump(desk_params, DEFAULT_CALIBRATION, [])
