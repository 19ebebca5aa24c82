"""Independent oracles used to freeze expected values.

Everything here deliberately avoids the package's quadrature/marching
code paths: the fundamental matrix and trajectories come from a
method-of-steps ODE reduction integrated by scipy at tight tolerances,
roots come from brentq on the closed-form characteristic function, and
the characteristic matrix is cross-checked by adaptive quadrature.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def scalar_fundamental_oracle(c: float, h: float, horizon: float):
    """K(t) for the scalar constant kernel F = c via the ODE reduction
    K'(t) = c (K(t) - K(t-h)), K(0) = K0 + 1, K = K0 for t < 0."""
    k0 = 1.0 / (c * h - 1.0)
    segments = []  # (t_lo, dense interpolant)

    def prev_value(t: float) -> float:
        if t < 0.0:
            return k0
        for lo, hi, sol in segments:
            if lo - 1e-12 <= t <= hi + 1e-12:
                return float(sol(np.clip(t, lo, hi)))
        if t <= 1e-9:  # first-segment right-hand side touching t - h = 0
            return k0
        raise ValueError(f"no segment covers {t}")

    t_lo = 0.0
    y0 = k0 + 1.0
    while t_lo < horizon - 1e-12:
        t_hi = min(t_lo + h, horizon)
        sol = solve_ivp(
            lambda t, y: c * (y - prev_value(t - h)),
            (t_lo, t_hi),
            [y0],
            rtol=1e-11,
            atol=1e-13,
            dense_output=True,
            max_step=h / 50,
        )
        segments.append((t_lo, t_hi, lambda t, s=sol: s.sol(t)[0]))
        t_lo = t_hi
        y0 = float(sol.y[0, -1])

    def k_of_t(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([k0 if tv < 0 else prev_value(tv) for tv in t_arr])
        return out if np.ndim(t) else float(out[0])

    return k_of_t


def scalar_trajectory_oracle(c: float, h: float, phi, horizon: float):
    """x(t, phi) for the scalar constant kernel via x' = c (x - x(t-h))
    with x(0) = c * integral of phi."""
    segments = []

    def prev_value(t: float) -> float:
        if t < 0.0:
            return float(phi(t))
        for lo, hi, sol in segments:
            if lo - 1e-12 <= t <= hi + 1e-12:
                return float(sol(np.clip(t, lo, hi)))
        if t <= 1e-9:
            return float(phi(0.0))
        raise ValueError(f"no segment covers {t}")

    x0 = c * quad(phi, -h, 0.0, limit=200)[0]
    t_lo, y0 = 0.0, x0
    while t_lo < horizon - 1e-12:
        t_hi = min(t_lo + h, horizon)
        sol = solve_ivp(
            lambda t, y: c * (y - prev_value(t - h)),
            (t_lo, t_hi),
            [y0],
            rtol=1e-11,
            atol=1e-13,
            dense_output=True,
            max_step=h / 50,
        )
        segments.append((t_lo, t_hi, lambda t, s=sol: s.sol(t)[0]))
        t_lo = t_hi
        y0 = float(sol.y[0, -1])

    def x_of_t(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([prev_value(tv) if tv >= 0 else float(phi(tv)) for tv in t_arr])
        return out if np.ndim(t) else float(out[0])

    return x_of_t


def scalar_real_root(c: float, h: float = 1.0) -> float | None:
    """Positive real root of 1 - c (1 - e^{-s h}) / s, if any (c h > 1)."""
    if c * h <= 1.0:
        return None

    def f(s: float) -> float:
        return 1.0 - c * (1.0 - np.exp(-s * h)) / s

    hi = 2.0 * c
    return float(brentq(f, 1e-9, hi, xtol=1e-12))


def char_matrix_quadrature(kernel_eval, h: float, s: complex) -> complex:
    """1 - integral e^{s theta} F(theta) d theta by adaptive quadrature
    (scalar kernels)."""
    re = quad(lambda t: np.real(np.exp(s * t) * kernel_eval(t)), -h, 0, limit=400)[0]
    im = quad(lambda t: np.imag(np.exp(s * t) * kernel_eval(t)), -h, 0, limit=400)[0]
    return 1.0 - (re + 1j * im)


def u_second_from_kprime(
    kprime_grid, w: np.ndarray, tau: float, horizon: float, step: float
):
    """Lemma-4 form of U'' for tau < 0:
    -K'^T(-tau) W - integral_0^inf K'^T(t - tau) W K'(t) dt, truncated."""
    count = int(round(horizon / step))
    ts = step * np.arange(count + 1)
    shifted = kprime_grid(ts - tau)
    base = kprime_grid(ts)
    wq = np.full(count + 1, step)
    wq[0] = wq[-1] = 0.5 * step
    integral = np.einsum("t,tba,bc,tcd->ad", wq, shifted, w, base)
    return -kprime_grid(-tau).T @ w - integral


def q_time_domain(kernel, kprime_grid, w, xi1, xi2, horizon, step):
    """Q(xi1, xi2) from its time-domain definition, using the closed-form
    inner derivative D(t, xi) = F(xi - t) + integral K'(t - xi + theta)
    F(theta) d theta over [max(xi - t, -h), xi].

    `kprime_grid` is the K' GridFunction; xi and the horizon must sit on
    its step grid.  The t nodes are vectorized through index windows.
    """
    h = kernel.h
    n = kernel.n
    count = int(round(horizon / step))
    kp = kprime_grid(step * np.arange(count + int(round(h / step)) + 1))

    def d_column(xi):
        """D(t_i, xi) for i = 0..count, shape (count+1, n, n)."""
        jxi = int(round((xi + h) / step))  # theta index of xi
        out = np.empty((count + 1, n, n))
        f_vals = np.stack(
            [kernel.evaluate(-h + l * step) for l in range(jxi + 1)]
        ) if jxi > 0 else None
        for i in range(count + 1):
            t = i * step
            acc = kernel.evaluate_jump_mean(xi - t)
            lo_idx = max(0, jxi - i)  # theta >= xi - t
            m = jxi - lo_idx
            if m > 0:
                wq = np.full(m + 1, step)
                wq[0] = wq[-1] = 0.5 * step
                # K'(t - xi + theta_l) = K' at index i - jxi + l
                idx = i + np.arange(lo_idx, jxi + 1) - jxi
                acc = acc + np.einsum(
                    "l,lab,lbc->ac", wq, kp[idx], f_vals[lo_idx:]
                )
            out[i] = acc
        return out

    d1 = d_column(xi1)
    d2 = d_column(xi2)
    wq = np.full(count + 1, step)
    wq[0] = wq[-1] = 0.5 * step
    return np.einsum("t,tba,bc,tcd->ad", wq, d1, w, d2)
