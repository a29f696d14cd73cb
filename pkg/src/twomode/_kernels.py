"""Compiled inner loops for the envelope and full-equation integrators.

Everything here is deliberately dumb: plain loops over preallocated arrays,
no allocation inside, all schedule logic handled by the callers.  When numba
is unavailable the same functions run as pure Python (slow but identical).
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def rk4_ensemble_chunk(u, dt, c1, c2, a11, a12, a22, a21, d1, d2,
                       sig1, sig2, noise, out, rec_stride, step_offset):
    """Advance an ensemble of envelope pairs by ``noise``-many steps.

    u        : complex128[n, 2], updated in place
    c1, c2   : complex linear coefficients (-Gamma_1 and -Gamma_2 - i*Delta_F)
    a??      : real Kerr coefficients divided by the mode frequency
    d1, d2   : complex drive coefficients (-i*f/(4*omega) * e^{i*theta})
    noise    : float64[n_steps, n, 4]; pass shape (n_steps, 0, 4) for none
    out      : complex128[n_rec, n, 2] filled where (global step) % rec_stride == 0
    """
    n_steps = noise.shape[0]
    n = u.shape[0]
    have_noise = noise.shape[1] > 0
    rec = 0
    for k in range(n_steps):
        for j in range(n):
            u1 = u[j, 0]
            u2 = u[j, 1]

            m1 = u1.real * u1.real + u1.imag * u1.imag
            m2 = u2.real * u2.real + u2.imag * u2.imag
            k1a = c1 * u1 + 1j * (a11 * m1 + a12 * m2) * u1 + d1 * np.conj(u2)
            k1b = c2 * u2 + 1j * (a22 * m2 + a21 * m1) * u2 + d2 * np.conj(u1)

            v1 = u1 + 0.5 * dt * k1a
            v2 = u2 + 0.5 * dt * k1b
            m1 = v1.real * v1.real + v1.imag * v1.imag
            m2 = v2.real * v2.real + v2.imag * v2.imag
            k2a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
            k2b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

            v1 = u1 + 0.5 * dt * k2a
            v2 = u2 + 0.5 * dt * k2b
            m1 = v1.real * v1.real + v1.imag * v1.imag
            m2 = v2.real * v2.real + v2.imag * v2.imag
            k3a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
            k3b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

            v1 = u1 + dt * k3a
            v2 = u2 + dt * k3b
            m1 = v1.real * v1.real + v1.imag * v1.imag
            m2 = v2.real * v2.real + v2.imag * v2.imag
            k4a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
            k4b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

            u1 = u1 + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            u2 = u2 + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            if have_noise:
                u1 = u1 + sig1 * complex(noise[k, j, 0], noise[k, j, 1])
                u2 = u2 + sig2 * complex(noise[k, j, 2], noise[k, j, 3])
            u[j, 0] = u1
            u[j, 1] = u2

        if (step_offset + k + 1) % rec_stride == 0:
            for j in range(n):
                out[rec, j, 0] = u[j, 0]
                out[rec, j, 1] = u[j, 1]
            rec += 1
    return rec


@njit(cache=True)
def plant_chunk(state, n_steps, dt, c1, c2, a11, a12, a22, a21, d1, d2,
                sig1, sig2, noise, alpha, rotstep, sample_steps, out_z, out_v):
    """Single-realization segment with an online lock-in filter.

    state : complex128[5] = (u1, u2, z1, z2, rot); rot tracks e^{-i*dw*t} so
            v1 = u1*rot and v2 = u2*conj(rot) are the lock-in frame signals.
    sample_steps : int64[m], in-chunk step indices (post-step) at which the
            filtered and raw frame signals are written to out_z / out_v.
    """
    u1 = state[0]
    u2 = state[1]
    z1 = state[2]
    z2 = state[3]
    rot = state[4]
    have_noise = noise.shape[0] > 0
    si = 0
    for k in range(n_steps):
        m1 = u1.real * u1.real + u1.imag * u1.imag
        m2 = u2.real * u2.real + u2.imag * u2.imag
        k1a = c1 * u1 + 1j * (a11 * m1 + a12 * m2) * u1 + d1 * np.conj(u2)
        k1b = c2 * u2 + 1j * (a22 * m2 + a21 * m1) * u2 + d2 * np.conj(u1)

        v1 = u1 + 0.5 * dt * k1a
        v2 = u2 + 0.5 * dt * k1b
        m1 = v1.real * v1.real + v1.imag * v1.imag
        m2 = v2.real * v2.real + v2.imag * v2.imag
        k2a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
        k2b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

        v1 = u1 + 0.5 * dt * k2a
        v2 = u2 + 0.5 * dt * k2b
        m1 = v1.real * v1.real + v1.imag * v1.imag
        m2 = v2.real * v2.real + v2.imag * v2.imag
        k3a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
        k3b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

        v1 = u1 + dt * k3a
        v2 = u2 + dt * k3b
        m1 = v1.real * v1.real + v1.imag * v1.imag
        m2 = v2.real * v2.real + v2.imag * v2.imag
        k4a = c1 * v1 + 1j * (a11 * m1 + a12 * m2) * v1 + d1 * np.conj(v2)
        k4b = c2 * v2 + 1j * (a22 * m2 + a21 * m1) * v2 + d2 * np.conj(v1)

        u1 = u1 + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        u2 = u2 + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if have_noise:
            u1 = u1 + sig1 * complex(noise[k, 0], noise[k, 1])
            u2 = u2 + sig2 * complex(noise[k, 2], noise[k, 3])

        rot = rot * rotstep
        w1 = u1 * rot
        w2 = u2 * np.conj(rot)
        z1 = z1 + alpha * (w1 - z1)
        z2 = z2 + alpha * (w2 - z2)

        if si < sample_steps.shape[0] and k == sample_steps[si]:
            out_z[si, 0] = z1
            out_z[si, 1] = z2
            out_v[si, 0] = w1
            out_v[si, 1] = w2
            si += 1

    state[0] = u1
    state[1] = u2
    state[2] = z1
    state[3] = z2
    state[4] = rot
    return si


@njit(cache=True)
def fast_chunk(y, t0, n_steps, dt, w1sq, w2sq, tg1, tg2, c1, c2, cc1, cc2,
               fd1, fd2, wf, thf, out, rec_stride, step_offset):
    """Fixed-step RK4 for the driven two-oscillator displacement equations.

    y : float64[4] = (q1, dq1/dt, q2, dq2/dt); tg? are the full (velocity)
    damping coefficients 2*Gamma.  Records y every ``rec_stride`` steps.
    """
    q1 = y[0]
    p1 = y[1]
    q2 = y[2]
    p2 = y[3]
    rec = 0
    for k in range(n_steps):
        t = t0 + k * dt

        co = np.cos(wf * t + thf)
        a1 = -w1sq * q1 - tg1 * p1 - c1 * q1 ** 3 - cc1 * q1 * q2 * q2 + fd1 * q2 * co
        a2 = -w2sq * q2 - tg2 * p2 - c2 * q2 ** 3 - cc2 * q2 * q1 * q1 + fd2 * q1 * co
        k1 = (p1, a1, p2, a2)

        co = np.cos(wf * (t + 0.5 * dt) + thf)
        b1 = q1 + 0.5 * dt * k1[0]
        b2 = p1 + 0.5 * dt * k1[1]
        b3 = q2 + 0.5 * dt * k1[2]
        b4 = p2 + 0.5 * dt * k1[3]
        a1 = -w1sq * b1 - tg1 * b2 - c1 * b1 ** 3 - cc1 * b1 * b3 * b3 + fd1 * b3 * co
        a2 = -w2sq * b3 - tg2 * b4 - c2 * b3 ** 3 - cc2 * b3 * b1 * b1 + fd2 * b1 * co
        k2 = (b2, a1, b4, a2)

        b1 = q1 + 0.5 * dt * k2[0]
        b2 = p1 + 0.5 * dt * k2[1]
        b3 = q2 + 0.5 * dt * k2[2]
        b4 = p2 + 0.5 * dt * k2[3]
        a1 = -w1sq * b1 - tg1 * b2 - c1 * b1 ** 3 - cc1 * b1 * b3 * b3 + fd1 * b3 * co
        a2 = -w2sq * b3 - tg2 * b4 - c2 * b3 ** 3 - cc2 * b3 * b1 * b1 + fd2 * b1 * co
        k3 = (b2, a1, b4, a2)

        co = np.cos(wf * (t + dt) + thf)
        b1 = q1 + dt * k3[0]
        b2 = p1 + dt * k3[1]
        b3 = q2 + dt * k3[2]
        b4 = p2 + dt * k3[3]
        a1 = -w1sq * b1 - tg1 * b2 - c1 * b1 ** 3 - cc1 * b1 * b3 * b3 + fd1 * b3 * co
        a2 = -w2sq * b3 - tg2 * b4 - c2 * b3 ** 3 - cc2 * b3 * b1 * b1 + fd2 * b1 * co
        k4 = (b2, a1, b4, a2)

        q1 = q1 + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        p1 = p1 + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        q2 = q2 + (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        p2 = p2 + (dt / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])

        if (step_offset + k + 1) % rec_stride == 0:
            out[rec, 0] = q1
            out[rec, 1] = p1
            out[rec, 2] = q2
            out[rec, 3] = p2
            rec += 1

    y[0] = q1
    y[1] = p1
    y[2] = q2
    y[3] = p2
    return rec
