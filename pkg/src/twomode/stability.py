"""Linearization about the self-oscillation state and its consequences.

State basis for the 3x3 problem:

    x1 = delta(r2/r1) about zeta0
    x2 = theta_F - phi_plus - Theta0   (pump-referenced sum-phase error)
    x3 = delta(r1)/r1_0

A pump-phase step delta_theta enters as x(0) = (0, delta_theta, 0); a slow
detuning excursion delta Delta_F(t) enters the x2 equation additively.  The
difference phase phi_minus is slaved: d(phi_minus)/dt = Phi . x plus the
direct detuning feed, integrated in closed form for transients.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (BelowThreshold, DegenerateSpectrum, InvalidParams,
                     NonlinearRegime, NotAdiabatic, StepTooLarge)
from .params import (SystemParams, delta_omega_slope, derive_constants,
                     stationary_state)

MAX_LINEAR_STEP = 0.1  # rad; linearized step responses beyond this refuse


@dataclass(frozen=True)
class Jacobian3:
    """The linearization matrix with its operating-point context."""

    matrix: np.ndarray
    params: SystemParams
    r1_0: float
    zeta0: float


def build_jacobian(p: SystemParams) -> Jacobian3:
    """All nine entries evaluated at the stationary state.

    The 13 and 33 entries vanish identically: neither the ratio equation
    nor the r1 equation couples to a uniform amplitude rescaling at the
    fixed point.
    """
    d = derive_constants(p)
    ss = stationary_state(p)
    root = np.sqrt(d.xi ** 2 - 1.0)
    z = d.zeta0
    r1sq = ss.r1_0 ** 2
    gsum = p.gamma1_damp + p.gamma2_damp
    gdif = p.gamma2_damp - p.gamma1_damp

    lam = np.zeros((3, 3))
    lam[0, 0] = -gsum
    lam[0, 1] = gdif * z * root
    lam[1, 0] = -gdif * root / z - 2.0 * (d.g12_plus / p.omega1) * r1sq * z
    lam[1, 1] = -gsum
    lam[1, 2] = -2.0 * ((d.g12_plus / p.omega1) * z ** 2
                        + d.g21_plus / p.omega2) * r1sq
    lam[2, 0] = p.gamma1_damp / z
    lam[2, 1] = p.gamma1_damp * root
    return Jacobian3(lam, p, ss.r1_0, z)


def phi_minus_vector(p: SystemParams) -> np.ndarray:
    """Coupling of the difference-phase rate to the x variables."""
    d = derive_constants(p)
    ss = stationary_state(p)
    root = np.sqrt(d.xi ** 2 - 1.0)
    z = d.zeta0
    r1sq = ss.r1_0 ** 2
    phi = np.empty(3)
    phi[0] = (-(p.gamma1_damp + p.gamma2_damp) * root / z
              + 2.0 * (d.g12_minus / p.omega1) * r1sq * z)
    phi[1] = p.gamma1_damp - p.gamma2_damp
    phi[2] = 2.0 * ((d.g12_minus / p.omega1) * z ** 2
                    - d.g21_minus / p.omega2) * r1sq
    return phi


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues and biorthonormal left/right vector sets.

    lam[0], lam[1] are the complex pair ordered by descending imaginary
    part; lam[2] is the real slow eigenvalue.  For an all-real spectrum
    the smallest-|Re| eigenvalue takes the lam[2] slot.  Rows of
    ``right``/``left`` are y_nu / ybar_nu with ybar_nu . y_mu = delta.
    """

    lam: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual_eig: float
    residual_orth: float

    @property
    def t_relax(self) -> float:
        return 1.0 / np.min(np.abs(self.lam.real))


def _cubic_roots(a, b, c):
    """Roots of x^3 + a x^2 + b x + c, closed form + Newton polish."""
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        s = np.sqrt(disc)
        t1 = np.cbrt(-q / 2.0 + s)
        t2 = np.cbrt(-q / 2.0 - s)
        x1 = t1 + t2
        re = -x1 / 2.0
        im = np.sqrt(3.0) / 2.0 * abs(t1 - t2)
        roots = np.array([x1, complex(re, im), complex(re, -im)])
    elif p == 0.0:
        roots = np.full(3, np.cbrt(-q), dtype=complex)
    else:
        # three real roots, trigonometric form
        m = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
        ang = np.arccos(arg) / 3.0
        roots = m * np.cos(ang - 2.0 * np.pi * np.arange(3) / 3.0) + 0j
    roots = roots - a / 3.0

    for _ in range(4):
        f = roots ** 3 + a * roots ** 2 + b * roots + c
        fp = 3.0 * roots ** 2 + 2.0 * a * roots + b
        safe = np.abs(fp) > 0
        roots = np.where(safe, roots - f / np.where(safe, fp, 1.0), roots)
    return roots


def _null_vector(a):
    """Best cross-product null vector of a (near-)singular 3x3 matrix."""
    crosses = [np.cross(a[i], a[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [np.linalg.norm(v) for v in crosses]
    return crosses[int(np.argmax(norms))]


def _eigvec(mat, lam, scale):
    v = _null_vector(mat - lam * np.eye(3))
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.ones(3, dtype=complex)
    else:
        v = v / nv
    # one inverse-iteration pass against a slightly shifted matrix
    shifted = mat - (lam + 1e-12 * scale) * np.eye(3)
    try:
        w = np.linalg.solve(shifted, v)
        v = w / np.linalg.norm(w)
    except np.linalg.LinAlgError:
        pass
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k])
    return v / phase


def eigensystem(jac) -> EigenSystem:
    """Closed-form cubic eigenvalues plus refined biorthonormal vectors."""
    mat = jac.matrix if isinstance(jac, Jacobian3) else np.asarray(jac, float)
    if mat.shape != (3, 3) or not np.all(np.isfinite(mat)):
        raise InvalidParams("need a finite 3x3 matrix")

    tr = np.trace(mat)
    minors = (mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
              + mat[0, 0] * mat[2, 2] - mat[0, 2] * mat[2, 0]
              + mat[1, 1] * mat[2, 2] - mat[1, 2] * mat[2, 1])
    det = np.linalg.det(mat)
    lam = _cubic_roots(-tr, minors, -det)

    scale = max(np.max(np.abs(lam)), np.linalg.norm(mat), 1e-300)
    pair = np.sort(np.abs(lam[:, None] - lam[None, :]), axis=None)
    if pair[3] < 1e-8 * scale:  # entries 0..2 are the zero diagonal
        raise DegenerateSpectrum(
            f"eigenvalue spacing {pair[3]:.3e} below 1e-8 of scale {scale:.3e}")

    real_mask = np.abs(lam.imag) <= 1e-10 * scale
    lam = np.where(real_mask, lam.real + 0j, lam)
    if int(real_mask.sum()) >= 3:
        # all-real spectrum: slow slot gets the smallest |Re|
        lam_r = np.sort(lam.real)[::-1]
        i3 = int(np.argmin(np.abs(lam_r)))
        lam3 = lam_r[i3]
        rest = np.delete(lam_r, i3)
        order = np.array([rest[0] + 0j, rest[1] + 0j, lam3 + 0j])
    else:
        # a real matrix has exactly one real root here; the pair is conjugate
        i3 = int(np.argmin(np.abs(lam.imag)))
        lam3 = lam[i3].real
        pair_vals = np.delete(lam, i3)
        pair_vals = pair_vals[np.argsort(-pair_vals.imag)]
        order = np.array([pair_vals[0], pair_vals[1], lam3 + 0j])
    lam = order

    right = np.empty((3, 3), dtype=complex)
    left = np.empty((3, 3), dtype=complex)
    conj_pair = np.abs(lam[0].imag) > 0 and np.allclose(lam[1], lam[0].conj())
    for nu in range(3):
        if nu == 1 and conj_pair:
            right[1] = right[0].conj()
            left[1] = left[0].conj()
            continue
        right[nu] = _eigvec(mat, lam[nu], scale)
        left[nu] = _eigvec(mat.T, lam[nu], scale)

    for nu in range(3):
        s = left[nu] @ right[nu]
        if abs(s) < 1e-12:
            raise DegenerateSpectrum("defective eigenvector pair")
        left[nu] = left[nu] / s

    res_eig = max(np.linalg.norm(mat @ right[nu] - lam[nu] * right[nu])
                  for nu in range(3)) / scale
    res_orth = max(abs(left[nu] @ right[mu])
                   for nu in range(3) for mu in range(3) if nu != mu)
    return EigenSystem(lam, right, left, float(res_eig), float(res_orth))


@dataclass(frozen=True)
class BifurcationEigs:
    """Analytic spectrum at the oscillation threshold."""

    lambda_pair: complex      # lambda_1; lambda_2 is its conjugate
    lambda3_slope: float      # d lambda_3 / d Delta_F at Delta_F = -omega_c
    omega_c: float


def bifurcation_eigs(p: SystemParams) -> BifurcationEigs:
    """Closed-form threshold eigenvalues and the slow-branch slope.

    At Delta_F = -omega_c the fast pair is -(G1+G2) +- i omega_c
    (G2-G1)/(G2+G1); the third eigenvalue grows linearly from zero.  Its
    slope follows from eliminating the fast pair adiabatically: lambda_3 =
    -(Lam31, Lam32) . Lam_fast^{-1} . (0, Lam23)^T evaluated at threshold.
    """
    d = derive_constants(p)
    gsum = p.gamma1_damp + p.gamma2_damp
    gdif = p.gamma2_damp - p.gamma1_damp
    if d.xi <= 1.0:
        raise BelowThreshold(f"xi = {d.xi:.6g} <= 1: no oscillation threshold")
    wc = d.omega_c
    root = np.sqrt(d.xi ** 2 - 1.0)
    pair = complex(-gsum, wc * gdif / gsum)
    slope = (-4.0 * p.gamma1_damp * p.gamma2_damp * root
             / (gsum ** 2 + gdif ** 2 * (d.xi ** 2 - 1.0)))
    return BifurcationEigs(pair, slope, wc)


def compute_C_spectral(p: SystemParams) -> float:
    """Settled phi_minus response to a unit pump-phase step.

    C = -sum_nu (ybar_nu)_2 (Phi . y_nu) / lambda_nu.  The sum over the
    conjugate pair cancels the imaginary parts; a residual above 1e-9
    signals a broken eigensystem.
    """
    jac = build_jacobian(p)
    es = eigensystem(jac)
    phi = phi_minus_vector(p)
    total = -np.sum(es.left[:, 1] * (es.right @ phi) / es.lam)
    if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
        raise DegenerateSpectrum(
            f"imaginary residual {total.imag:.3e} in the spectral sum")
    return float(total.real)


@dataclass(frozen=True)
class StepResponse:
    """Linearized transient after a pump-phase step."""

    t: np.ndarray
    dphi1: np.ndarray
    dphi2: np.ndarray
    dphi_plus: np.ndarray
    dphi_minus: np.ndarray
    dr1: np.ndarray
    dr2: np.ndarray
    dphi1_final: float
    dphi2_final: float
    c: float
    g: float
    t_relax: float
    dtheta: float


def step_response(p: SystemParams, dtheta: float, tspan=None,
                  n_samples: int = 2001) -> StepResponse:
    """Modal transient for x(0) = (0, dtheta, 0).

    The phi_minus quadrature is integrated term by term:
    integral of e^{lam t} = (e^{lam t} - 1)/lam, so the settled split is
    algebraically exact rather than quadrature-limited.
    """
    if not np.isfinite(dtheta):
        raise InvalidParams("dtheta must be finite")
    if abs(dtheta) > MAX_LINEAR_STEP:
        raise NonlinearRegime(
            f"|dtheta| = {abs(dtheta):.3g} rad exceeds the "
            f"{MAX_LINEAR_STEP} rad linear-regime bound")

    jac = build_jacobian(p)
    es = eigensystem(jac)
    phi = phi_minus_vector(p)
    ss = stationary_state(p)

    t_r = es.t_relax
    if tspan is None:
        tspan = (0.0, 8.0 * t_r)
    t = np.linspace(tspan[0], tspan[1], int(n_samples))

    a = es.left[:, 1] * dtheta               # ybar_nu . (0, dtheta, 0)
    ex = np.exp(np.outer(es.lam, t))         # (3, nt)
    x = np.einsum("n,nt,ni->it", a, ex, es.right)      # (3 state, nt)
    f = es.right @ phi                       # Phi . y_nu
    dminus = np.einsum("n,nt->t", a * f / es.lam, ex - 1.0)

    im_leak = max(np.max(np.abs(x.imag)), np.max(np.abs(dminus.imag)))
    if im_leak > 1e-9 * max(abs(dtheta), 1e-30):
        raise DegenerateSpectrum("imaginary leakage in modal reconstruction")
    x = x.real
    dminus = dminus.real

    dplus = dtheta - x[1]
    c = compute_C_spectral(p)
    g = 0.5 * (1.0 - c)
    return StepResponse(
        t=t,
        dphi1=0.5 * (dplus + dminus),
        dphi2=0.5 * (dplus - dminus),
        dphi_plus=dplus,
        dphi_minus=dminus,
        dr1=ss.r1_0 * x[2],
        dr2=ss.r2_0 * x[2] + ss.r1_0 * x[0],
        dphi1_final=0.5 * (1.0 + c) * dtheta,
        dphi2_final=0.5 * (1.0 - c) * dtheta,
        c=c, g=g, t_relax=t_r, dtheta=dtheta)


@dataclass(frozen=True)
class PulseResponse:
    """Bookkeeping of a slow pump-detuning excursion of given area.

    Frames matter here.  ``dphi_minus_model`` accumulates in the fixed
    pre-pulse frames, heading to (1+C)*area; subtracting the quasi-static
    frequency shift (the co-moving frame) leaves a residual that vanishes
    with the pulse slope.  The sum phase stays locked to the drive, whose
    own phase advances by exactly ``area``.
    """

    t: np.ndarray
    pulse: np.ndarray
    x: np.ndarray
    dphi_minus_model: np.ndarray
    area: float
    dphi_minus_model_final: float
    dphi_minus_comoving_final: float
    dphi_plus_locked_final: float    # change of phi_plus relative to drive
    drive_phase_gain: float          # extra phase the drive itself racks up
    x_final_norm: float
    x_peak_norm: float
    tracking_residual: float
    adiabaticity: float
    c: float


def adiabatic_pulse_response(p: SystemParams, area: float, duration: float,
                             n_steps: int = None) -> PulseResponse:
    """Linear response to delta Delta_F(t) = 2(area/T) sin^2(pi t / T).

    Pre: the pulse must be slow, max|d(dDF)/dt| * t_r / max|dDF| <= 10;
    meaningful adiabatic numbers need it well below 1.  n_steps=None
    picks a count that keeps the classical integrator inside its
    stability region for the fastest eigenvalue.
    """
    if not (np.isfinite(area) and np.isfinite(duration) and duration > 0):
        raise InvalidParams("area must be finite, duration finite and > 0")
    jac = build_jacobian(p)
    es = eigensystem(jac)
    phi = phi_minus_vector(p)
    t_r = es.t_relax

    # sin^2 bump: peak 2A/T, peak slope 2 pi A / T^2
    adiab = np.pi * t_r / duration
    if adiab > 10.0:
        raise NotAdiabatic(
            f"pulse slope ratio {adiab:.3g} exceeds 10 (duration {duration:.3g} s"
            f" vs relaxation {t_r:.3g} s)")

    lam_max = float(np.max(np.abs(es.lam)))
    if n_steps is None:
        n = max(8192, int(np.ceil(duration * lam_max / 1.5)))
    else:
        n = int(n_steps)
    if n < 64:
        raise InvalidParams("n_steps too small to resolve the pulse")
    dt = duration / n
    # RK4 is only conditionally stable; past |lam| dt ~ 2.8 the fast
    # pair amplifies instead of decaying
    if dt * lam_max > 2.5:
        raise StepTooLarge(
            f"dt * |lam_max| = {dt * lam_max:.3g} > 2.5; "
            f"raise n_steps above {duration * lam_max / 2.5:.0f}")
    t = dt * np.arange(n + 1)
    pulse = (2.0 * area / duration) * np.sin(np.pi * t / duration) ** 2

    mat = jac.matrix

    def rate(ti, state):
        dd = (2.0 * area / duration) * np.sin(np.pi * ti / duration) ** 2
        x = state[:3]
        out = np.empty(4)
        out[:3] = mat @ x + np.array([0.0, dd, 0.0])
        out[3] = phi @ x + dd
        return out

    state = np.zeros(4)
    xs = np.empty((n + 1, 3))
    dminus = np.empty(n + 1)
    xs[0] = 0.0
    dminus[0] = 0.0
    for k in range(n):
        tk = t[k]
        k1 = rate(tk, state)
        k2 = rate(tk + 0.5 * dt, state + 0.5 * dt * k1)
        k3 = rate(tk + 0.5 * dt, state + 0.5 * dt * k2)
        k4 = rate(tk + dt, state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        xs[k + 1] = state[:3]
        dminus[k + 1] = state[3]

    norms = np.linalg.norm(xs, axis=1)
    peak = float(np.max(norms))
    slope = delta_omega_slope(p)
    c = 2.0 * slope - 1.0
    comoving_final = float(dminus[-1] - 2.0 * slope * area)

    # quasi-static tracking: x_qs = -Lam^{-1} e2 * pulse(t)
    xqs = -np.linalg.solve(mat, np.array([0.0, 1.0, 0.0]))
    track = xs - np.outer(pulse, xqs)
    tracking = float(np.max(np.linalg.norm(track, axis=1))
                     / max(peak, 1e-300))

    return PulseResponse(
        t=t, pulse=pulse, x=xs, dphi_minus_model=dminus, area=float(area),
        dphi_minus_model_final=float(dminus[-1]),
        dphi_minus_comoving_final=comoving_final,
        dphi_plus_locked_final=float(-xs[-1, 1]),
        drive_phase_gain=float(area),
        x_final_norm=float(norms[-1]),
        x_peak_norm=peak,
        tracking_residual=tracking,
        adiabaticity=float(adiab),
        c=c)
