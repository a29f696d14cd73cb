"""Parameter handling, derived constants and the stationary state."""

import math

import numpy as np
import pytest
from pytest import approx

from conftest import TWO_PI, make_desk, make_device
from twomode import (DEFAULT_CALIBRATION, BelowThreshold, InvalidCalibration,
                     InvalidParams, PumpCalibration, SystemParams,
                     ZeroStateStable, coupling_g, derive_constants, fit_kappa,
                     pump_map, stationary_state)
from twomode.params import delta_omega_slope, zero_state_stable


def rhs_residual(p, ss):
    """Hand-typed envelope equations evaluated on the claimed fixed point.

    In frames co-rotating at (delta_omega, -delta_omega) a true stationary
    point is an exact zero of the right-hand side.
    """
    ph = 0.5 * ss.phi_plus_0
    u1 = ss.r1_0 * np.exp(1j * ph)
    u2 = ss.r2_0 * np.exp(1j * ph)
    e = np.exp(1j * p.theta_f)
    d1 = (-p.gamma1_damp * u1
          + 1j * ((1.5 * p.g11 * abs(u1) ** 2 + p.g12 * abs(u2) ** 2)
                  / p.omega1) * u1
          - 1j * (p.f1 / (4 * p.omega1)) * e * np.conj(u2)
          - 1j * ss.delta_omega * u1)
    d2 = (-(p.gamma2_damp + 1j * p.delta_f) * u2
          + 1j * ((1.5 * p.g22 * abs(u2) ** 2 + p.g21 * abs(u1) ** 2)
                  / p.omega2) * u2
          - 1j * (p.f2 / (4 * p.omega2)) * e * np.conj(u1)
          + 1j * ss.delta_omega * u2)
    scale = p.gamma2_damp * ss.r1_0
    return max(abs(d1), abs(d2)) / scale


class TestValidation:
    def test_ordering_required(self):
        with pytest.raises(InvalidParams):
            SystemParams(omega1=2.0, omega2=1.0, gamma1_damp=0.1,
                         gamma2_damp=0.2, g11=1, g22=1, g12=1, g21=1,
                         f1=1.0, f2=1.0)
        with pytest.raises(InvalidParams):
            SystemParams(omega1=1.0, omega2=2.0, gamma1_damp=0.3,
                         gamma2_damp=0.2, g11=1, g22=1, g12=1, g21=1,
                         f1=1.0, f2=1.0)

    def test_drive_ratio_enforced(self):
        with pytest.raises(InvalidParams, match="f1/f2"):
            SystemParams(omega1=1.0, omega2=2.0, gamma1_damp=0.1,
                         gamma2_damp=0.2, g11=1, g22=1, g12=2.0, g21=1.0,
                         f1=1.0, f2=1.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidParams):
            SystemParams(omega1=1.0, omega2=math.inf, gamma1_damp=0.1,
                         gamma2_damp=0.2, g11=1, g22=1, g12=1, g21=1,
                         f1=1.0, f2=1.0)

    def test_calibration_rejects_nonpositive(self):
        with pytest.raises(InvalidCalibration):
            PumpCalibration(kappa_f=-1.0)
        with pytest.raises(InvalidCalibration):
            PumpCalibration(kappa_f=1.0, mass_scale=0.0)


class TestCalibration:
    def test_fit_kappa_matches_inline_least_squares(self):
        cur = (189e-6, 379e-6)
        grad = (2.3e-3, 4.5e-3)
        expect = sum(c * f for c, f in zip(cur, grad)) \
            / sum(c * c for c in cur)
        assert fit_kappa(cur, grad) == approx(expect, rel=1e-15)
        assert DEFAULT_CALIBRATION.kappa_f == approx(11.932293350876996,
                                                     rel=1e-15)

    def test_fit_kappa_validation(self):
        with pytest.raises(InvalidCalibration):
            fit_kappa([], [])
        with pytest.raises(InvalidCalibration):
            fit_kappa([1e-6], [1.0, 2.0])
        with pytest.raises(InvalidCalibration):
            fit_kappa([0.0, 0.0], [1.0, 2.0])

    def test_pump_map_scales(self, device_params):
        p = device_params
        f1_expected = DEFAULT_CALIBRATION.kappa_f * 379e-6 / 8.15e-11
        assert p.f1 == approx(f1_expected, rel=1e-15)
        assert p.f2 / p.f1 == approx(p.g21 / p.g12, rel=1e-12)
        off = pump_map(0.0, DEFAULT_CALIBRATION, p)
        assert off.f1 == 0.0 and off.f2 == 0.0

    def test_pump_map_rejects_bad_current(self, device_params):
        with pytest.raises(InvalidParams):
            pump_map(-1e-6, DEFAULT_CALIBRATION, device_params)
        with pytest.raises(InvalidParams):
            pump_map(math.nan, DEFAULT_CALIBRATION, device_params)


class TestDerivedConstants:
    def test_device_point(self, device_params):
        d = derive_constants(device_params)
        assert d.xi == approx(3.481870062038651, rel=1e-12)
        assert d.omega_c == approx(768.6494950209028, rel=1e-12)
        assert d.zeta0 == approx(0.22369148111100293, rel=1e-12)
        assert d.theta0 == approx(0.291304475294313, rel=1e-12)

    def test_closed_form_identities(self, device_params):
        p = device_params
        d = derive_constants(p)
        xi = math.sqrt(p.f1 * p.f2 / (16 * p.omega1 * p.omega2
                                      * p.gamma1_damp * p.gamma2_damp))
        assert d.xi == approx(xi, rel=1e-14)
        gsum = p.gamma1_damp + p.gamma2_damp
        assert d.omega_c == approx(gsum * math.sqrt(xi ** 2 - 1), rel=1e-14)
        assert d.theta0 == approx(math.asin(1.0 / xi), rel=1e-14)

    def test_desk_point_pinned_to_xi_2(self, desk_params):
        d = derive_constants(desk_params)
        assert d.xi == approx(2.0, rel=1e-12)
        assert d.omega_c == approx(598.5537901972918, rel=1e-12)
        # at xi = 2 the stable pump-phase offset is exactly pi/6
        assert d.theta0 == approx(math.pi / 6, rel=1e-14)

    def test_below_threshold_raises_on_edge_quantities(self):
        p = make_device(current=50e-6)
        d = derive_constants(p)
        assert d.xi < 1.0
        with pytest.raises(BelowThreshold):
            d.omega_c
        with pytest.raises(BelowThreshold):
            d.theta0
        with pytest.raises(BelowThreshold):
            stationary_state(p)


class TestStationaryState:
    def test_device_values_match_independent_solve(self, device_params):
        ss = stationary_state(device_params)
        assert ss.r1_0 == approx(6.522982922867687e-08, rel=1e-12)
        assert ss.r2_0 == approx(1.4591357112780514e-08, rel=1e-12)
        assert ss.delta_omega == approx(463.06508803335373, rel=1e-12)
        assert ss.phi_plus_0 == approx(-0.291304475294313, rel=1e-12)

    def test_desk_values_match_independent_solve(self, desk_params):
        ss = stationary_state(desk_params)
        assert ss.r1_0 == approx(1.3733590293585715e-08, rel=1e-12)
        assert ss.r2_0 == approx(8.43659495372164e-09, rel=1e-12)
        assert ss.delta_omega == approx(-15.870725056591542, rel=1e-9)
        assert ss.phi_plus_0 == approx(-math.pi / 6, rel=1e-12)

    def test_fixed_point_zeroes_the_envelope_equations(self, device_params,
                                                       desk_params):
        for p in (device_params, desk_params):
            ss = stationary_state(p)
            assert rhs_residual(p, ss) < 1e-12

    def test_frequency_sum_pinned_to_pump(self, device_params):
        p = device_params
        ss = stationary_state(p)
        total = ss.omega_self1 + ss.omega_self2
        assert total == approx(p.omega1 + p.omega2 + p.delta_f, rel=1e-15)

    def test_oscillating_branch_window(self, device_params):
        wc = derive_constants(device_params).omega_c
        with pytest.raises(ZeroStateStable):
            stationary_state(device_params.with_drive(delta_f=-1.01 * wc))
        inside = stationary_state(device_params.with_drive(delta_f=-0.9 * wc))
        assert not inside.zero_state_also_stable
        above = stationary_state(device_params.with_drive(delta_f=1.1 * wc))
        assert above.zero_state_also_stable
        assert zero_state_stable(device_params.with_drive(delta_f=1.1 * wc))
        # the standard operating detuning (1 kHz) is itself above +omega_c
        assert stationary_state(device_params).zero_state_also_stable
        assert not zero_state_stable(device_params.with_drive(delta_f=0.0))

    def test_amplitude_squared_linear_in_detuning(self, device_params):
        wc = derive_constants(device_params).omega_c
        dfs = np.linspace(-0.5 * wc, 0.5 * wc, 7)
        r1sq = np.array([stationary_state(
            device_params.with_drive(delta_f=float(d))).r1_0 ** 2
            for d in dfs])
        slopes = np.diff(r1sq) / np.diff(dfs)
        assert np.ptp(slopes) < 1e-10 * abs(slopes[0])


class TestCouplingSplit:
    def test_device_values(self, device_params):
        split = coupling_g(device_params)
        assert split.c == approx(-0.8658154184632386, rel=1e-12)
        assert split.g == approx(0.9329077092316194, rel=1e-12)
        s = delta_omega_slope(device_params)
        assert split.c == approx(2 * s - 1, rel=1e-14)
        assert split.g == approx(1 - s, rel=1e-14)

    def test_desk_values(self, desk_params):
        split = coupling_g(desk_params)
        assert split.g == approx(0.9577706754211687, rel=1e-9)

    def test_slope_matches_finite_difference(self, device_params):
        p = device_params
        h = 0.02 * abs(p.delta_f)
        dwp = stationary_state(p.with_drive(delta_f=p.delta_f + h))
        dwm = stationary_state(p.with_drive(delta_f=p.delta_f - h))
        fd = (dwp.delta_omega - dwm.delta_omega) / (2 * h)
        assert delta_omega_slope(p) == approx(fd, rel=1e-9)

    def test_slope_invariances(self, device_params):
        p = device_params
        s0 = delta_omega_slope(p)
        assert delta_omega_slope(p.with_drive(delta_f=0.2 * p.delta_f)) \
            == approx(s0, rel=1e-12)
        assert delta_omega_slope(p.scaled_pump(1.7)) == approx(s0, rel=1e-12)

    def test_below_threshold(self):
        with pytest.raises(BelowThreshold):
            coupling_g(make_device(current=50e-6))
