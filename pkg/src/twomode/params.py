"""Parameter containers and closed-form operating-point quantities.

Two vibrational modes (labels 1 and 2, with mode 2 the fast, strongly damped
one) are coupled dispersively and pumped near the sum of their eigenfrequencies.
Above the pump threshold the pair self-oscillates; every closed-form quantity
about that operating point lives here.

Unit conventions
----------------
All frequencies and damping rates are angular (rad/s).  Configuration files
use Hz; the conversion happens once at ingestion (see ``twomode.config``).
Mode amplitudes are in metres.  The quartic coefficients ``g11, g22, g12, g21``
are mass-reduced and carry rad^2 s^-2 m^-2; the drive strengths ``f1, f2``
carry rad^2 s^-2 (force per unit displacement per unit mass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

from .errors import (
    BelowThreshold,
    InvalidCalibration,
    InvalidParams,
    ZeroStateStable,
)

_RATIO_RTOL = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """Slow-envelope model parameters.

    Attributes
    ----------
    omega1, omega2 : float
        Mode eigenfrequencies (rad/s), ``omega2 > omega1 > 0``.
    gamma1_damp, gamma2_damp : float
        Amplitude decay rates (rad/s), ``gamma2_damp > gamma1_damp > 0``.
    g11, g22 : float
        Self-Duffing coefficients (rad^2 s^-2 m^-2).
    g12, g21 : float
        Cross (dispersive) coefficients; both scale the same physical
        coupling, so the drive ratio is tied to them (see below).
    f1, f2 : float
        Mass-reduced drive strengths (rad^2 s^-2).  Because both modes are
        driven by the same pump, ``f1/f2 == g12/g21`` whenever both cross
        terms are nonzero.
    delta_f : float
        Pump detuning from the mode-frequency sum (rad/s).
    theta_f : float
        Pump phase (rad).
    """

    omega1: float
    omega2: float
    gamma1_damp: float
    gamma2_damp: float
    g11: float
    g22: float
    g12: float
    g21: float
    f1: float
    f2: float
    delta_f: float = 0.0
    theta_f: float = 0.0

    def __post_init__(self):
        vals = [self.omega1, self.omega2, self.gamma1_damp, self.gamma2_damp,
                self.g11, self.g22, self.g12, self.g21, self.f1, self.f2,
                self.delta_f, self.theta_f]
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParams("all parameters must be finite")
        if not (self.omega2 > self.omega1 > 0):
            raise InvalidParams("need omega2 > omega1 > 0")
        if not (self.gamma2_damp > self.gamma1_damp > 0):
            raise InvalidParams("need gamma2_damp > gamma1_damp > 0")
        if min(self.g11, self.g22, self.g12, self.g21) < 0:
            raise InvalidParams("quartic coefficients must be >= 0")
        if self.f1 < 0 or self.f2 < 0:
            raise InvalidParams("drive strengths must be >= 0")
        # shared-pump consistency; degenerate corners (zero pump or a zero
        # cross coefficient) are exempt so synthetic studies remain possible
        if self.g12 > 0 and self.g21 > 0 and (self.f1 > 0 or self.f2 > 0):
            if not math.isclose(self.f1 * self.g21, self.f2 * self.g12,
                                rel_tol=_RATIO_RTOL):
                raise InvalidParams("f1/f2 must equal g12/g21")

    def with_drive(self, *, delta_f: float | None = None,
                   theta_f: float | None = None) -> "SystemParams":
        """Copy with a different detuning and/or pump phase."""
        kw = {}
        if delta_f is not None:
            kw["delta_f"] = delta_f
        if theta_f is not None:
            kw["theta_f"] = theta_f
        return replace(self, **kw)

    def scaled_pump(self, factor: float) -> "SystemParams":
        """Copy with both drive strengths multiplied by ``factor``."""
        if factor < 0 or not math.isfinite(factor):
            raise InvalidParams("pump scale factor must be finite and >= 0")
        return replace(self, f1=self.f1 * factor, f2=self.f2 * factor)


class DerivedConstants:
    """Threshold and degenerate quartic combinations for one parameter set.

    ``xi`` (dimensionless pump strength relative to threshold) and the four
    combinations ``g12_plus, g12_minus, g21_plus, g21_minus`` are always
    available.  The oscillation-edge quantities ``omega_c``, ``zeta0`` and
    ``theta0`` only exist at or above threshold and raise
    :class:`BelowThreshold` otherwise.
    """

    def __init__(self, p: SystemParams):
        self.params = p
        self.xi = math.sqrt(
            p.f1 * p.f2 / (16.0 * p.omega1 * p.omega2
                           * p.gamma1_damp * p.gamma2_damp))
        r = p.omega1 / p.omega2
        self.g12_plus = p.g12 + 1.5 * p.g22 * r
        self.g12_minus = p.g12 - 1.5 * p.g22 * r
        self.g21_plus = p.g21 + 1.5 * p.g11 / r
        self.g21_minus = p.g21 - 1.5 * p.g11 / r

    def _require_threshold(self, what: str):
        if self.xi < 1.0:
            raise BelowThreshold(
                f"{what} undefined below threshold (xi = {self.xi:.6g} < 1)")

    @property
    def omega_c(self) -> float:
        """Half-width (rad/s) of the detuning band where the zero state is unstable."""
        self._require_threshold("omega_c")
        p = self.params
        return (p.gamma1_damp + p.gamma2_damp) * math.sqrt(self.xi ** 2 - 1.0)

    @property
    def zeta0(self) -> float:
        """Stationary amplitude ratio r2/r1."""
        self._require_threshold("zeta0")
        p = self.params
        return math.sqrt(p.gamma1_damp * p.f2 * p.omega1
                         / (p.gamma2_damp * p.f1 * p.omega2))

    @property
    def theta0(self) -> float:
        """Stationary drive angle, arcsin(1/xi), in (0, pi/2]."""
        self._require_threshold("theta0")
        return math.asin(1.0 / self.xi)

    def __repr__(self):
        core = f"xi={self.xi:.6g}"
        if self.xi >= 1.0:
            core += f", omega_c={self.omega_c:.6g}, zeta0={self.zeta0:.6g}"
        return f"DerivedConstants({core})"


@dataclass(frozen=True)
class StationaryState:
    """Self-oscillation fixed point in the co-rotating frames.

    ``delta_omega`` is the pulling of mode 1 away from ``omega1``; mode 2
    takes the rest of the detuning so that the two self-oscillation
    frequencies always add up to the pump frequency:
    ``omega_self1 + omega_self2 == omega1 + omega2 + delta_f``.
    """

    r1_0: float
    r2_0: float
    phi_plus_0: float
    delta_omega: float
    omega_self1: float
    omega_self2: float
    zero_state_also_stable: bool


class CouplingSplit(NamedTuple):
    """Settled linear response of the phase pair to a pump-phase step.

    ``c`` is the settled change of ``phi1 - phi2`` per unit step and ``g``
    the share taken by mode 2; mode 1 takes ``1 - g``.
    """

    c: float
    g: float


@dataclass(frozen=True)
class PumpCalibration:
    """Linear map from pump drive current to force gradient.

    ``kappa_f`` is in N m^-1 A^-1 and ``mass_scale`` (the mass of mode 1, kg)
    sets the conversion from force gradient to the mass-reduced drive ``f1``.
    """

    kappa_f: float
    mass_scale: float = 8.15e-11

    def __post_init__(self):
        if not (self.kappa_f > 0 and math.isfinite(self.kappa_f)):
            raise InvalidCalibration("kappa_f must be positive and finite")
        if not (self.mass_scale > 0 and math.isfinite(self.mass_scale)):
            raise InvalidCalibration("mass_scale must be positive and finite")


def fit_kappa(currents: Sequence[float], force_gradients: Sequence[float]) -> float:
    """Least-squares slope through the origin of force gradient vs current."""
    x = [float(c) for c in currents]
    y = [float(f) for f in force_gradients]
    if len(x) != len(y) or not x:
        raise InvalidCalibration("need equal, nonzero numbers of points")
    sxx = sum(c * c for c in x)
    if sxx == 0.0:
        raise InvalidCalibration("all calibration currents are zero")
    return sum(c * f for c, f in zip(x, y)) / sxx


# anchor points used to calibrate the default current-to-drive map
_CAL_CURRENTS = (189e-6, 379e-6)
_CAL_FORCE_GRADIENTS = (2.3e-3, 4.5e-3)

DEFAULT_CALIBRATION = PumpCalibration(
    kappa_f=fit_kappa(_CAL_CURRENTS, _CAL_FORCE_GRADIENTS))


def derive_constants(p: SystemParams) -> DerivedConstants:
    """Compute threshold constants; valid above and below threshold."""
    return DerivedConstants(p)


def stationary_state(p: SystemParams) -> StationaryState:
    """Closed-form self-oscillation fixed point.

    Raises
    ------
    BelowThreshold
        If ``xi <= 1`` (the marginal point ``xi == 1`` is classified as
        below threshold: the oscillating branch has zero amplitude there).
    ZeroStateStable
        If ``delta_f <= -omega_c``, where only the zero state exists.
    """
    d = derive_constants(p)
    if d.xi <= 1.0:
        raise BelowThreshold(
            f"no self-oscillation at xi = {d.xi:.6g} (need xi > 1)")
    wc = d.omega_c
    if p.delta_f <= -wc:
        raise ZeroStateStable(
            f"delta_f = {p.delta_f:.6g} <= -omega_c = {-wc:.6g}: "
            "oscillating branch absent")
    z0 = d.zeta0
    denom = (d.g12_plus / p.omega1) * z0 ** 2 + d.g21_plus / p.omega2
    r1_sq = (p.delta_f + wc) / denom
    r1 = math.sqrt(r1_sq)
    root = math.sqrt(d.xi ** 2 - 1.0)
    d_omega = ((p.g12 * z0 ** 2 + 1.5 * p.g11) / p.omega1) * r1_sq \
        - p.gamma1_damp * root
    return StationaryState(
        r1_0=r1,
        r2_0=z0 * r1,
        phi_plus_0=p.theta_f - d.theta0,
        delta_omega=d_omega,
        omega_self1=p.omega1 + d_omega,
        omega_self2=p.omega2 + p.delta_f - d_omega,
        zero_state_also_stable=p.delta_f >= wc,
    )


def delta_omega_slope(p: SystemParams) -> float:
    """d(delta_omega)/d(delta_f): the fraction of a detuning change absorbed
    by mode 1's self-oscillation frequency.  Independent of ``delta_f`` and
    of a common rescaling of ``(f1, f2)``."""
    d = derive_constants(p)
    if d.xi <= 1.0:
        raise BelowThreshold("state-pulling slope needs xi > 1")
    z0sq = d.zeta0 ** 2
    num = p.g12 * z0sq + 1.5 * p.g11
    den = d.g12_plus * z0sq + d.g21_plus * (p.omega1 / p.omega2)
    return num / den


def coupling_g(p: SystemParams) -> CouplingSplit:
    """Step-split constants of the operating point.

    A pump-phase step ``dtheta`` ends up split between the mode phases as
    ``dphi2 = g*dtheta`` and ``dphi1 = (1-g)*dtheta``; the settled response
    of the phase difference is ``c*dtheta``.  Because the sum of the two
    self-oscillation frequencies is pinned to the pump, the two constants
    follow from how a detuning change is shared between the modes:
    ``c = 2*s - 1`` and ``g = 1 - s`` with ``s = d(delta_omega)/d(delta_f)``.
    """
    s = delta_omega_slope(p)
    return CouplingSplit(c=2.0 * s - 1.0, g=1.0 - s)


def pump_map(current: float, cal: PumpCalibration,
             template: SystemParams) -> SystemParams:
    """Build a parameter set for a given pump current.

    The drive pair is assigned so that ``f1/f2 == g12/g21`` with the overall
    scale set by ``kappa_f * current / mass_scale``.
    """
    if not (current >= 0 and math.isfinite(current)):
        raise InvalidParams("current must be finite and >= 0")
    f = cal.kappa_f * current
    f1 = f / cal.mass_scale
    if current > 0 and (template.g12 <= 0 or template.g21 <= 0):
        raise InvalidParams(
            "pump_map needs positive g12 and g21 to set the drive ratio")
    f2 = f1 * template.g21 / template.g12 if current > 0 else 0.0
    return replace(template, f1=f1, f2=f2)


def zero_state_stable(p: SystemParams) -> bool:
    """Whether the quiescent (zero-amplitude) state is linearly stable."""
    d = derive_constants(p)
    if d.xi <= 1.0:
        return True
    return abs(p.delta_f) >= d.omega_c
