"""Discrete pump-phase feedback: update laws, settling, noise rejection.

Numeric settling figures come from smoke runs of this implementation at the
bench point and are regression anchors, not independent oracles; the oracle
content is the closed-loop algebra (fixed points, splits, variance ratios).
"""

import numpy as np
import pytest
from pytest import approx

from twomode import (CycleConfig, DetectionModel, ExcursionWarning,
                     InsufficientResolution, InvalidParams, NoiseConfig,
                     SlowFlowPlant, TooShort, build_jacobian,
                     controller_statistics, coupling_g, eigensystem,
                     stabilize_mode1, stabilize_mode2, theta_next_mode1,
                     theta_next_mode2)

DET = DetectionModel()
DET_NOISY = DetectionModel(sigma_det1=1.4e-10, sigma_det2=8.4e-11)


@pytest.fixture(scope="module")
def timing(desk_params):
    g = coupling_g(desk_params).g
    t_r = eigensystem(build_jacobian(desk_params)).t_relax
    return g, t_r


def make_cfg(g, t_r, mode=2, **kw):
    kw.setdefault("t_measure", 8.8e-3)
    kw.setdefault("t_wait", 5.0 * t_r)
    return CycleConfig(target_mode=mode, g=g, **kw)


class TestUpdateLaws:
    def test_mode2_example(self):
        assert theta_next_mode2(0.0, 0.01, 0.94) == \
            approx(0.01 / 0.94, rel=1e-15)

    def test_mode1_example(self):
        assert theta_next_mode1(0.0, 0.01, 0.94) == \
            approx(0.01 / 0.06, rel=1e-15)

    def test_fixed_points(self):
        # either law is stationary when the measured mode tracks theta,
        # which pins the target mode's phase to zero
        for th in (-0.3, 0.0, 0.7):
            assert theta_next_mode2(th, th, 0.94) == approx(th, abs=1e-15)
            assert theta_next_mode1(th, th, 0.94) == approx(th, abs=1e-15)


class TestConfigValidation:
    def test_bad_target(self):
        with pytest.raises(InvalidParams):
            CycleConfig(t_measure=1e-2, target_mode=3, g=0.9)

    def test_bad_times(self):
        with pytest.raises(InvalidParams):
            CycleConfig(t_measure=-1e-2, target_mode=2, g=0.9)
        with pytest.raises(InvalidParams):
            CycleConfig(t_measure=1e-2, target_mode=2, g=0.9, t_wait=0.0)

    def test_degenerate_g(self):
        for g in (1e-4, 0.99999, 0.0, 1.0):
            with pytest.raises(InvalidParams):
                CycleConfig(t_measure=1e-2, target_mode=2, g=g)

    def test_bad_limit(self):
        with pytest.raises(InvalidParams):
            CycleConfig(t_measure=1e-2, target_mode=2, g=0.9,
                        theta_limit=0.0)


class TestPlantGuards:
    def test_coarse_step_rejected_by_detector(self, desk_params):
        # a fast lock-in demands dt <= tau/10, tighter here than the
        # integrator's own step bound
        plant = SlowFlowPlant(desk_params, dt=2.0e-5)
        with pytest.raises(InsufficientResolution):
            plant.reset(DetectionModel(tau_lockin=1e-4, sample_period=1e-4))

    def test_advance_requires_reset(self, desk_params):
        with pytest.raises(InvalidParams):
            SlowFlowPlant(desk_params).advance_ticks(1)

    def test_set_theta_finite(self, desk_params):
        plant = SlowFlowPlant(desk_params)
        plant.reset(DET)
        with pytest.raises(InvalidParams):
            plant.set_theta(np.nan)

    def test_wait_below_relaxation_time(self, desk_params, timing):
        g, t_r = timing
        cfg = make_cfg(g, t_r, t_wait=0.2 * t_r)
        with pytest.raises(InvalidParams):
            stabilize_mode2(SlowFlowPlant(desk_params), DET, cfg, 5)

    def test_measure_below_one_tick(self, desk_params, timing):
        g, t_r = timing
        cfg = make_cfg(g, t_r, t_measure=1e-4)
        with pytest.raises(InvalidParams):
            stabilize_mode2(SlowFlowPlant(desk_params), DET, cfg, 5)

    def test_target_mode_mismatch(self, desk_params, timing):
        g, t_r = timing
        with pytest.raises(InvalidParams):
            stabilize_mode2(SlowFlowPlant(desk_params), DET,
                            make_cfg(g, t_r, mode=1), 5)
        with pytest.raises(InvalidParams):
            stabilize_mode1(SlowFlowPlant(desk_params), DET,
                            make_cfg(g, t_r, mode=2), 5)

    def test_need_a_cycle(self, desk_params, timing):
        g, t_r = timing
        with pytest.raises(InvalidParams):
            stabilize_mode2(SlowFlowPlant(desk_params), DET,
                            make_cfg(g, t_r), 0)


class TestNoiselessLoop:
    def test_prepared_state_is_quiescent(self, desk_params, timing):
        g, t_r = timing
        run = stabilize_mode2(SlowFlowPlant(desk_params), DET,
                              make_cfg(g, t_r), 4)
        assert np.abs(run.theta).max() < 1e-9
        assert np.abs(run.phi2_ticks).max() < 1e-9
        assert np.abs(run.eps).max() < 1e-9

    def test_kick_recovery_mode2(self, desk_params, timing):
        g, t_r = timing
        th0 = 0.1
        run = stabilize_mode2(SlowFlowPlant(desk_params), DET,
                              make_cfg(g, t_r), 6, theta0=th0)
        assert run.theta[0] == approx(th0, rel=1e-12)
        # a pump-phase step lands on the target mode with weight g
        assert run.phi2_end[0] == approx(g * th0, rel=1e-2)
        assert run.phi1_end[0] + run.phi2_end[0] == approx(th0, rel=1e-3)
        # one update removes all but the settling tail
        assert abs(run.theta[1]) < 1e-2 * th0
        assert abs(run.phi2_end[1]) < 1e-2 * abs(run.phi2_end[0])
        assert abs(run.phi2_end[-1]) < 1e-9
        # the loop's rest point is any theta = phi1 with phi2 = 0: the
        # transient deposits a permanent offset in the free phase sum
        assert run.theta[-1] == approx(run.phi1_end[-1], abs=1e-9)

    def test_kick_recovery_mode1(self, desk_params, timing):
        g, t_r = timing
        run = stabilize_mode1(SlowFlowPlant(desk_params), DET,
                              make_cfg(g, t_r, mode=1), 10, theta0=0.05)
        assert run.theta[0] == approx(0.05, rel=1e-12)
        assert abs(run.phi1_end[-1]) < 1e-9
        assert run.phi2_end[-1] == approx(run.theta[-1], abs=1e-9)
        assert abs(run.theta[-1] - run.theta[-2]) < 1e-8

    def test_disabled_loop_holds_theta(self, desk_params, timing):
        g, t_r = timing
        run = stabilize_mode2(SlowFlowPlant(desk_params), DET,
                              make_cfg(g, t_r), 3, enabled=False,
                              theta0=0.07)
        assert not run.enabled
        assert np.all(run.theta == approx(0.07, rel=1e-12))


class TestNoisyLoop:
    def test_mode2_variance_reduction(self, desk_params, desk_noise, timing):
        g, t_r = timing
        cfg = make_cfg(g, t_r, theta_limit=np.deg2rad(60.0))
        on = stabilize_mode2(SlowFlowPlant(desk_params, noise=desk_noise),
                             DET_NOISY, cfg, 150, det_seed=3)
        off = stabilize_mode2(SlowFlowPlant(desk_params, noise=desk_noise),
                              DET_NOISY, cfg, 150, enabled=False, det_seed=3)
        st = controller_statistics(on, baseline=off)
        assert st.var_ratio_vs_baseline > 50.0
        assert st.sigma_phi < 0.05
        assert on.excursion_count == 0
        # per-cycle theta increment is -eps/g by construction
        assert st.theta_walk_rate == approx(st.predicted_walk_rate, rel=0.05)

    def test_mode1_variance_reduction(self, desk_params, timing):
        # the 1/(1-g) command amplification tolerates per-cycle phase
        # diffusion only well below (1-g)*pi/2; run this leg cooler
        g, t_r = timing
        noise = NoiseConfig(d1=1.6e-20, d2=8e-21, seed=11)
        cfg = make_cfg(g, t_r, mode=1, theta_limit=1e3)
        on = stabilize_mode1(SlowFlowPlant(desk_params, noise=noise),
                             DET_NOISY, cfg, 150, det_seed=3)
        off = stabilize_mode1(SlowFlowPlant(desk_params, noise=noise),
                              DET_NOISY, cfg, 150, enabled=False, det_seed=3)
        st = controller_statistics(on, baseline=off)
        assert st.var_ratio_vs_baseline > 20.0
        assert st.sigma_phi < 0.05

    def test_excursions_warn_and_clamp(self, desk_params, desk_noise, timing):
        g, t_r = timing
        cfg = make_cfg(g, t_r, theta_limit=1e-3, clamp=True)
        with pytest.warns(ExcursionWarning):
            run = stabilize_mode2(SlowFlowPlant(desk_params, noise=desk_noise),
                                  DET, cfg, 120)
        assert run.excursion_count > 50
        assert np.abs(run.theta).max() <= 1e-3 + 1e-12


@pytest.fixture(scope="module")
def short_and_long(desk_params, timing):
    g, t_r = timing
    cfg = make_cfg(g, t_r)
    mk = lambda n: stabilize_mode2(SlowFlowPlant(desk_params), DET, cfg, n)
    return mk(99), mk(100)


class TestStatistics:
    def test_too_short(self, short_and_long):
        short, _ = short_and_long
        with pytest.raises(TooShort):
            controller_statistics(short)

    def test_baseline_length_mismatch(self, short_and_long):
        short, long = short_and_long
        with pytest.raises(InvalidParams):
            controller_statistics(long, baseline=short)

    def test_skip_range(self, short_and_long):
        _, long = short_and_long
        with pytest.raises(InvalidParams):
            controller_statistics(long, skip=99)
