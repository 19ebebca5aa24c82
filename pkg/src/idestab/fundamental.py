"""Fundamental matrix of the integral delay system.

K(t) solves K(t) = integral F(theta) K(t+theta) d theta for t >= 0 with
constant prehistory K0 = (integral F - I)^{-1}.  The marching scheme uses
the Volterra second-kind form

    K(t) = K0 * integral_{-h}^{-t} F + integral_0^t K(u) F(u - t) du,

where the prehistory term is exact (closed-form kernel moments) and the
integral is a composite trapezoid whose end term contains the unknown with
an O(step) weight, so each node costs one small linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepTooCoarse
from .grids import GridFunction, num_steps
from .kernel import KernelConstants, KernelSpec

_END_WEIGHT_COND = 1e12


def _end_weight_inverse(kernel: KernelSpec, step: float) -> np.ndarray:
    """Inverse of I - (step/2) F(0-), the implicit end weight."""
    m = np.eye(kernel.n) - 0.5 * step * kernel.value_at_zero()
    if np.linalg.cond(m) > _END_WEIGHT_COND:
        raise StepTooCoarse(
            "end-weight matrix I - (step/2) F(0-) is numerically singular; "
            "reduce the step"
        )
    return np.linalg.inv(m)


def march_volterra(
    kernel: KernelSpec,
    inhomogeneous: list[np.ndarray],
    step: float,
    side: str,
) -> np.ndarray:
    """March X(t_i) = G(t_i) + integral_0^{t_i} conv(X, F)(u) du.

    side = "right": X(t) = G(t) + int X(u) F(u - t) du   (fundamental eq.)
    side = "left":  X(t) = G(t) + int F(u - t) X(u) du   (trajectories)

    `inhomogeneous` holds G at every node.  Returns the samples array.
    """
    m = num_steps(kernel.h, step)
    f_by_lag = kernel.sample_grid(m)[::-1]  # f_by_lag[d] = F(-d * step)
    f_rev = np.ascontiguousarray(f_by_lag[::-1])
    inv = _end_weight_inverse(kernel, step)

    steps_total = len(inhomogeneous) - 1
    cols = inhomogeneous[0].shape[1]
    out = np.empty((steps_total + 1, kernel.n, cols))
    out[0] = inhomogeneous[0]
    for i in range(1, steps_total + 1):
        lo = max(0, i - m)
        hist = out[lo:i]
        lags = f_rev[m - i + lo : m]
        if side == "right":
            acc = np.einsum("tab,tbc->ac", hist, lags)
            acc -= 0.5 * hist[0] @ f_by_lag[i - lo]
            out[i] = (inhomogeneous[i] + step * acc) @ inv
        else:
            acc = np.einsum("tab,tbc->ac", lags, hist)
            acc -= 0.5 * f_by_lag[i - lo] @ hist[0]
            out[i] = inv @ (inhomogeneous[i] + step * acc)
    return out


def fundamental_matrix(
    kernel: KernelSpec,
    constants: KernelConstants,
    horizon: float,
    step: float,
) -> GridFunction:
    """Fundamental matrix K on [0, horizon] with constant extension K0."""
    if horizon < kernel.h:
        raise ValueError("horizon must be at least the delay h")
    num_steps(kernel.h, step)  # step must divide h
    total = num_steps(horizon, step)
    k0 = constants.k0
    inhom = [k0 @ kernel.partial_moment0(i * step) for i in range(total + 1)]
    samples = march_volterra(kernel, inhom, step, side="right")
    return GridFunction(0.0, horizon, step, samples, left_extension=k0.copy())


def fundamental_derivative(kernel: KernelSpec, k: GridFunction) -> GridFunction:
    """Weak derivative K' on the grid of K.

    K' solves K'(t) = F(-t) + integral_0^t K'(u) F(u - t) du.  The point
    values of the extension of F use the mean of one-sided limits at its
    jumps so that later trapezoids over K' keep second order.
    """
    total = k.samples.shape[0] - 1
    step = k.step
    inhom = [kernel.value_at_zero()]
    inhom += [kernel.evaluate_jump_mean(-i * step) for i in range(1, total + 1)]
    samples = march_volterra(kernel, inhom, step, side="right")
    return GridFunction(0.0, k.t1, step, samples)


def reconstruction_residual(
    kernel: KernelSpec, k: GridFunction, kprime: GridFunction
) -> float:
    """max over nodes of || K(0) + integral_0^t K' - K(t) ||.

    K' samples carry the mean of one-sided limits at jump nodes; for the
    range ending exactly at a jump the trapezoid end value must be the
    left limit instead, which adds (step/2) times the half-jump of F.
    """
    if not k.same_grid(kprime):
        raise ValueError("K and K' must share a grid")
    step = kprime.step
    cum = np.cumsum(kprime.samples * step, axis=0)
    cum -= 0.5 * step * (kprime.samples + kprime.samples[0])
    count = kprime.samples.shape[0]
    for i in range(1, count):
        fix = kernel.evaluate_right(-i * step) - kernel.evaluate_jump_mean(-i * step)
        if np.any(fix):
            cum[i] += 0.5 * step * fix
    rebuilt = k.samples[0] + cum
    return float(np.max(np.linalg.norm(rebuilt - k.samples, axis=(1, 2))))


@dataclass(frozen=True)
class FundamentalResiduals:
    """Max-norm defects of the two defining equations and of the jump size."""

    left_form: float    # K(t) - integral F(theta) K(t+theta)
    right_form: float   # K(t) - integral K(t+theta) F(theta)
    jump_identity: float  # || K(0) - K0 - I ||


def _cubic_midpoints(samples: np.ndarray) -> np.ndarray:
    """Midpoint values from 4-point Lagrange stencils (one-sided at ends)."""
    count = samples.shape[0]
    mid = np.empty((count - 1,) + samples.shape[1:])
    if count == 2:
        mid[0] = 0.5 * (samples[0] + samples[1])
        return mid
    if count == 3:
        # quadratic through the three points, evaluated at the midpoints
        mid[0] = (3 * samples[0] + 6 * samples[1] - samples[2]) / 8
        mid[1] = (-samples[0] + 6 * samples[1] + 3 * samples[2]) / 8
        return mid
    mid[1:-1] = (
        -samples[:-3] + 9 * samples[1:-2] + 9 * samples[2:-1] - samples[3:]
    ) / 16
    mid[0] = (5 * samples[0] + 15 * samples[1] - 5 * samples[2] + samples[3]) / 16
    mid[-1] = (samples[-4] - 5 * samples[-3] + 15 * samples[-2] + 5 * samples[-1]) / 16
    return mid


def identity_residuals(kernel: KernelSpec, k: GridFunction) -> FundamentalResiduals:
    """Check K against both defining equations on every grid node.

    The residual quadrature interleaves cubic-interpolated midpoints with
    the grid samples (Simpson-grade accuracy), so it does not reproduce
    the trapezoid identity the marching scheme enforces and instead
    measures the actual discretization error.  The part of the integral
    over the constant prehistory is evaluated in closed form, so the jump
    of K at zero never sits inside a quadrature range.
    """
    step = k.step
    m = num_steps(kernel.h, step)
    k0 = k.left_extension
    if k0 is None:
        raise ValueError("K must carry its constant prehistory")
    total = k.samples.shape[0] - 1

    f_grid = kernel.sample_grid(m)
    f_mid = np.empty((m, kernel.n, kernel.n))
    for j in range(m):
        f_mid[j] = kernel.evaluate(-kernel.h + (j + 0.5) * step)
    k_mid = _cubic_midpoints(k.samples)

    res_l = 0.0
    res_r = 0.0
    for i in range(1, total + 1):
        lo = max(0, i - m)
        q = i - lo
        hist = k.samples[lo : i + 1]
        hist_mid = k_mid[lo:i]
        f_part = f_grid[m - q :]
        f_part_mid = f_mid[m - q :]
        prod_l = np.einsum("tab,tbc->tac", f_part, hist)
        prod_r = np.einsum("tab,tbc->tac", hist, f_part)
        mid_l = np.einsum("tab,tbc->ac", f_part_mid, hist_mid)
        mid_r = np.einsum("tab,tbc->ac", hist_mid, f_part_mid)
        lhs_l = 0.5 * step * (prod_l.sum(axis=0) + mid_l) - 0.25 * step * (
            prod_l[0] + prod_l[-1]
        )
        lhs_r = 0.5 * step * (prod_r.sum(axis=0) + mid_r) - 0.25 * step * (
            prod_r[0] + prod_r[-1]
        )
        if i < m:
            pm = kernel.partial_moment0(i * step)
            lhs_l += pm @ k0
            lhs_r += k0 @ pm
        res_l = max(res_l, float(np.linalg.norm(k.samples[i] - lhs_l)))
        res_r = max(res_r, float(np.linalg.norm(k.samples[i] - lhs_r)))

    jump = float(np.linalg.norm(k.samples[0] - k0 - np.eye(kernel.n)))
    return FundamentalResiduals(left_form=res_l, right_form=res_r, jump_identity=jump)
