"""Compiled inner loops: map iteration and the adaptive RK8(5,3) pendulum flow.

Everything here is deliberately scalar and allocation-free inside the hot
loops; callers batch over orbits at the Python level.  All kernels are
deterministic (no fastmath reassociation).
"""

import math

import numpy as np
from numba import njit

from ._rk8_tableau import A, B, C, E3, E5, N_STAGES

TWO_PI = 2.0 * math.pi

# Status codes returned by the flow kernels.
STATUS_OK = 0
STATUS_STEP_LIMIT = 1

_A = np.ascontiguousarray(A)
_B = np.ascontiguousarray(B)
_C = np.ascontiguousarray(C)
_E3 = np.ascontiguousarray(E3)
_E5 = np.ascontiguousarray(E5)


@njit(cache=True)
def std_map_orbit(y0, x0, eps, eta, omega, n_iter):
    """Iterate the dissipative standard map n_iter times.

    Returns (y, x, winding): arrays of length n_iter + 1 with x wrapped to
    [0, 2*pi) and winding the accumulated integer number of 2*pi turns.
    """
    y = np.empty(n_iter + 1)
    x = np.empty(n_iter + 1)
    wind = np.zeros(n_iter + 1, dtype=np.int64)
    yc = y0
    xc = x0 % TWO_PI
    w = 0
    y[0] = yc
    x[0] = xc
    for n in range(1, n_iter + 1):
        yc = yc + eps * math.sin(xc) - eta * (yc - omega)
        xc = xc + yc
        turns = math.floor(xc / TWO_PI)
        xc -= TWO_PI * turns
        w += turns
        y[n] = yc
        x[n] = xc
        wind[n] = w
    return y, x, wind


@njit(cache=True, inline="always")
def _pend_rhs(t, p1, q1, eps, eta, omega, q2_0):
    """Pendulum vector field on (p1, q1); q2 = q2_0 + t rides along exactly."""
    dp = eps * (math.sin(q1) + math.sin(q1 - (q2_0 + t))) - eta * (p1 - omega)
    return dp, p1


@njit(cache=True)
def _advance(p1, q1, q2_0, t_span, eps, eta, omega, rtol, atol, max_steps, h_start):
    """Integrate the pendulum from local time 0 to t_span (RK8(5,3) pair).

    Returns (p1, q1, status, h_next, n_steps).  h_next is the step proposal
    carried over to the next call so section loops keep their controller
    state.
    """
    kp = np.empty(N_STAGES + 1)
    kq = np.empty(N_STAGES + 1)
    t = 0.0
    h = h_start
    if h <= 0.0:
        h = 1e-2
    if h > t_span:
        h = t_span
    n_steps = 0
    rejected = False
    while t < t_span:
        if n_steps >= max_steps:
            return p1, q1, STATUS_STEP_LIMIT, h, n_steps
        last = h >= t_span - t
        if last:
            h = t_span - t
        kp[0], kq[0] = _pend_rhs(t, p1, q1, eps, eta, omega, q2_0)
        for s in range(1, N_STAGES):
            ap = 0.0
            aq = 0.0
            for j in range(s):
                a = _A[s, j]
                if a != 0.0:
                    ap += a * kp[j]
                    aq += a * kq[j]
            kp[s], kq[s] = _pend_rhs(
                t + _C[s] * h, p1 + h * ap, q1 + h * aq, eps, eta, omega, q2_0
            )
        bp = 0.0
        bq = 0.0
        for j in range(N_STAGES):
            bp += _B[j] * kp[j]
            bq += _B[j] * kq[j]
        p_new = p1 + h * bp
        q_new = q1 + h * bq
        kp[N_STAGES], kq[N_STAGES] = _pend_rhs(
            t + h, p_new, q_new, eps, eta, omega, q2_0
        )

        # Hairer's combined 5th/3rd order error estimate.
        e5p = 0.0
        e5q = 0.0
        e3p = 0.0
        e3q = 0.0
        for j in range(N_STAGES + 1):
            e5p += _E5[j] * kp[j]
            e5q += _E5[j] * kq[j]
            e3p += _E3[j] * kp[j]
            e3q += _E3[j] * kq[j]
        sp = atol + rtol * max(abs(p1), abs(p_new))
        sq = atol + rtol * max(abs(q1), abs(q_new))
        err5 = (e5p / sp) ** 2 + (e5q / sq) ** 2
        err3 = (e3p / sp) ** 2 + (e3q / sq) ** 2
        if err5 == 0.0 and err3 == 0.0:
            err = 0.0
        else:
            err = abs(h) * err5 / math.sqrt((err5 + 0.01 * err3) * 2.0)

        n_steps += 1
        if err <= 1.0:
            if last:
                t = t_span
            else:
                t += h
            p1 = p_new
            q1 = q_new
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * err ** (-0.125))
            if rejected:
                fac = min(1.0, fac)
            h *= fac
            rejected = False
        else:
            h *= max(0.2, 0.9 * err ** (-0.125))
            rejected = True
        if h < 1e-14:
            h = 1e-14
    return p1, q1, STATUS_OK, h, n_steps


@njit(cache=True)
def pend_flow(p1, q1, q2, duration, eps, eta, omega, rtol, atol, max_steps):
    """Flow the full (p1, q1, q2) state for `duration`; q2 advances exactly."""
    p1f, q1f, status, _, n = _advance(
        p1, q1, q2, duration, eps, eta, omega, rtol, atol, max_steps, 1e-2
    )
    return p1f, q1f, q2 + duration, status, n


@njit(cache=True)
def windowed_amp(zw, tau0, dtau, sigma):
    """Sum zw_n * exp(-i sigma (tau0 + n dtau)) via a phase recurrence.

    The unit ratio is re-synchronised from exact trig every 2048 samples so
    rounding drift stays far below the window's spectral floor.
    """
    n = zw.shape[0]
    rr = math.cos(sigma * dtau)
    ri = -math.sin(sigma * dtau)
    ar = 0.0
    ai = 0.0
    er = 0.0
    ei = 0.0
    for m in range(n):
        if m % 2048 == 0:
            ph = sigma * (tau0 + m * dtau)
            er = math.cos(ph)
            ei = -math.sin(ph)
        zr = zw[m].real
        zi = zw[m].imag
        ar += zr * er - zi * ei
        ai += zr * ei + zi * er
        tr = er * rr - ei * ri
        ei = er * ri + ei * rr
        er = tr
    return ar, ai


@njit(cache=True)
def windowed_amp_derivs(zw, tau0, dtau, sigma):
    """(A, A', A'') of the windowed sum at sigma: the sigma-derivatives bring
    down factors (-i tau) and (-tau^2)."""
    n = zw.shape[0]
    rr = math.cos(sigma * dtau)
    ri = -math.sin(sigma * dtau)
    a0r = 0.0
    a0i = 0.0
    a1r = 0.0
    a1i = 0.0
    a2r = 0.0
    a2i = 0.0
    er = 0.0
    ei = 0.0
    for m in range(n):
        if m % 2048 == 0:
            ph = sigma * (tau0 + m * dtau)
            er = math.cos(ph)
            ei = -math.sin(ph)
        tau = tau0 + m * dtau
        zr = zw[m].real
        zi = zw[m].imag
        vr = zr * er - zi * ei
        vi = zr * ei + zi * er
        a0r += vr
        a0i += vi
        # times -i*tau
        a1r += tau * vi
        a1i -= tau * vr
        # times -tau^2
        a2r -= tau * tau * vr
        a2i -= tau * tau * vi
        tr = er * rr - ei * ri
        ei = er * ri + ei * rr
        er = tr
    return a0r, a0i, a1r, a1i, a2r, a2i


@njit(cache=True)
def pend_sections(p1, q1, n_sections, eps, eta, omega, rtol, atol, max_steps):
    """Record (p1, q1) on the q2 = 0 mod 2*pi section, starting at q2 = 0.

    q1 is wrapped to [0, 2*pi) after each section and the integer winding is
    accumulated, keeping sin/cos arguments small over long runs.
    """
    ps = np.empty(n_sections + 1)
    qs = np.empty(n_sections + 1)
    wind = np.zeros(n_sections + 1, dtype=np.int64)
    turns = math.floor(q1 / TWO_PI)
    q1 -= TWO_PI * turns
    w = turns
    ps[0] = p1
    qs[0] = q1
    wind[0] = w
    h = 1e-2
    for s in range(n_sections):
        p1, q1, status, h, _ = _advance(
            p1, q1, 0.0, TWO_PI, eps, eta, omega, rtol, atol, max_steps, h
        )
        if status != STATUS_OK:
            return ps, qs, wind, status, s
        turns = math.floor(q1 / TWO_PI)
        q1 -= TWO_PI * turns
        w += turns
        ps[s + 1] = p1
        qs[s + 1] = q1
        wind[s + 1] = w
    return ps, qs, wind, STATUS_OK, n_sections
