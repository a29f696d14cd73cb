"""Shared parameter sets for the test suite.

Two operating points recur everywhere:

* device: the measured string-resonator constants driven at 379 uA with
  the pump detuned 1 kHz above the sum frequency.
* desk: same force constants with linewidths broadened to 5 / 50 Hz and
  the pump current pinned to xi = 2 exactly; relaxation is ~18 ms, so
  feedback and noise experiments run in seconds.

Expected values in the tests marked "independent solve" were produced by
a standalone script that solves the stationary algebra with scipy root
finding and differentiates the hand-typed envelope equations by finite
differences; none of them were generated by the code under test.
"""

import math

import pytest

from twomode import (DEFAULT_CALIBRATION, NoiseConfig, SystemParams,
                     pump_map)

TWO_PI = 2.0 * math.pi

DEVICE_CURRENT = 379e-6
DESK_CURRENT = 8.257560154663161e-4   # xi = 2.0 at the desk linewidths


def _template(gamma1_hz, gamma2_hz, delta_f_hz):
    return SystemParams(
        omega1=TWO_PI * 47030.7, omega2=TWO_PI * 1867195.4,
        gamma1_damp=TWO_PI * gamma1_hz, gamma2_damp=TWO_PI * gamma2_hz,
        g11=1.91e22, g22=7.38e25, g12=8.41e22, g21=1.26e25,
        f1=1.0, f2=1.26e25 / 8.41e22, delta_f=TWO_PI * delta_f_hz)


def make_device(delta_f_hz=1000.0, current=DEVICE_CURRENT):
    return pump_map(current, DEFAULT_CALIBRATION,
                    _template(0.48, 36.2, delta_f_hz))


def make_desk(delta_f_hz=50.0, current=DESK_CURRENT):
    return pump_map(current, DEFAULT_CALIBRATION,
                    _template(5.0, 50.0, delta_f_hz))


@pytest.fixture(scope="session")
def device_params():
    return make_device()


@pytest.fixture(scope="session")
def desk_params():
    return make_desk()


@pytest.fixture()
def desk_noise():
    return NoiseConfig(d1=4e-19, d2=2e-19, seed=11)
