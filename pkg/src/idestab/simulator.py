"""Initial-value problems for the integral delay system and the
simulation-based stability oracle.

The solver marches the renewal form x(t) = g(t) + integral_0^t
F(u - t) x(u) du with g built from the initial function; the oracle
combines trajectory growth rates with two characteristic-root screens
(real-axis bisection and an imaginary-axis margin).  The oracle is
advisory ground truth for validation and is never consulted by the
criterion path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .fundamental import march_volterra
from .grids import GridFunction, num_steps, trapezoid_weights
from .kernel import KernelSpec, char_matrix, imaginary_axis_margin


def solve_ide(
    kernel: KernelSpec,
    phi: GridFunction,
    horizon: float,
    step: float,
) -> GridFunction:
    """Solve the system for t in [0, horizon] from the initial function.

    `phi` must be sampled on [-h, 0] with the same step (the sample at 0
    is the left limit).  The forcing g(t) = integral_{-h}^{-t} F(theta)
    phi(t + theta) d theta is a trapezoid over the phi samples for
    t in [0, h] and zero afterwards.
    """
    m = num_steps(kernel.h, step)
    if abs(phi.t0 + kernel.h) > 1e-9 or abs(phi.t1) > 1e-9:
        raise GridMismatch("phi must be sampled on [-h, 0]")
    if abs(phi.step - step) > 1e-9 * step:
        raise GridMismatch(
            f"phi step {phi.step} differs from requested step {step}"
        )
    total = num_steps(horizon, step)
    f_grid = kernel.sample_grid(m)
    cols = phi.shape[1]
    zero = np.zeros((kernel.n, cols))
    inhom = []
    for i in range(total + 1):
        if i > m:
            inhom.append(zero)
            continue
        w = trapezoid_weights(m - i + 1, step)
        g = np.einsum("t,tab,tbc->ac", w, f_grid[: m - i + 1], phi.samples[i:])
        inhom.append(g)
    samples = march_volterra(kernel, inhom, step, side="left")
    return GridFunction(0.0, horizon, step, samples)


def seminorm(phi: GridFunction) -> float:
    """sqrt of the trapezoid of ||phi(theta)||^2 over the grid."""
    w = trapezoid_weights(phi.samples.shape[0], phi.step)
    sq = np.sum(phi.samples**2, axis=(1, 2))
    return float(np.sqrt(np.dot(w, sq)))


def cauchy_check(
    kernel: KernelSpec,
    k: GridFunction,
    kprime: GridFunction,
    phi: GridFunction,
    t_set,
) -> float:
    """Max deviation between the solved trajectory and the Cauchy formula.

    The formula integrates d/dt integral_{-h}^{xi} K(t - xi + theta)
    F(theta) d theta against phi; the inner time derivative is realized in
    closed form through K' as F(xi - t) + integral K'(t - xi + theta)
    F(theta) d theta.
    """
    step = phi.step
    m = num_steps(kernel.h, step)
    f_grid = kernel.sample_grid(m)
    x = solve_ide(kernel, phi, max(float(max(t_set)), kernel.h), step)

    worst = 0.0
    w_outer = trapezoid_weights(m + 1, step)
    for t in t_set:
        acc = np.zeros((kernel.n, phi.shape[1]))
        for jxi in range(m + 1):
            xi = -kernel.h + jxi * step
            j_lo = max(0, jxi - int(round((t - 0.0) / step)))
            count = jxi - j_lo + 1
            y = kernel.evaluate_jump_mean(xi - t)
            if count > 1:
                w_in = trapezoid_weights(count, step)
                kp_vals = kprime(t - xi + (-kernel.h + np.arange(j_lo, jxi + 1) * step))
                y = y + np.einsum(
                    "t,tab,tbc->ac", w_in, kp_vals, f_grid[j_lo : jxi + 1]
                )
            acc += w_outer[jxi] * (y @ phi.samples[jxi])
        worst = max(worst, float(np.linalg.norm(acc - x(t))))
    return worst


# -- initial-function builders -----------------------------------------------


def constant_phi(kernel: KernelSpec, value, step: float) -> GridFunction:
    """phi identically equal to `value` (vector or matrix) on [-h, 0]."""
    m = num_steps(kernel.h, step)
    v = np.atleast_2d(np.asarray(value, dtype=float))
    if v.shape[0] == 1 and kernel.n > 1:
        v = v.T
    samples = np.broadcast_to(v, (m + 1,) + v.shape).copy()
    return GridFunction(-kernel.h, 0.0, step, samples)


def piecewise_constant_phi(
    kernel: KernelSpec, values: np.ndarray, step: float
) -> GridFunction:
    """phi piecewise constant on equal sub-intervals of [-h, 0].

    values has shape (pieces, n) or (pieces, n, cols); nodes that land on
    a sub-interval boundary take the mean of the adjacent values.
    """
    m = num_steps(kernel.h, step)
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    pieces = vals.shape[0]
    samples = np.empty((m + 1,) + vals.shape[1:])
    for j in range(m + 1):
        pos = j / m * pieces  # position in units of sub-intervals
        idx = min(int(pos), pieces - 1)
        if 0 < pos < pieces and abs(pos - round(pos)) < 1e-9:
            samples[j] = 0.5 * (vals[int(round(pos)) - 1] + vals[int(round(pos))])
        else:
            samples[j] = vals[idx]
    return GridFunction(-kernel.h, 0.0, step, samples)


def fundamental_shift_phi(
    k: GridFunction, kernel: KernelSpec, tau: float, step: float
) -> GridFunction:
    """phi(theta) = K(tau + theta) - K0 on [-h, 0]."""
    m = num_steps(kernel.h, step)
    k0 = k.left_extension
    thetas = -kernel.h + step * np.arange(m + 1)
    samples = k(tau + thetas) - k0
    return GridFunction(-kernel.h, 0.0, step, samples)


def random_phi(kernel: KernelSpec, rng: np.random.Generator, step: float) -> GridFunction:
    """Random piecewise-constant phi on 8 equal sub-intervals with entries
    uniform in [-1, 1], normalized to unit seminorm."""
    vals = rng.uniform(-1.0, 1.0, size=(8, kernel.n))
    phi = piecewise_constant_phi(kernel, vals, step)
    norm = seminorm(phi)
    if norm < 1e-12:
        vals = np.ones((8, kernel.n))
        phi = piecewise_constant_phi(kernel, vals, step)
        norm = seminorm(phi)
    return GridFunction(phi.t0, phi.t1, phi.step, phi.samples / norm)


# -- stability oracle ---------------------------------------------------------


def fit_log_slope(ts: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against ts.

    Values at or below 1e-300 mean the trajectory is numerically dead;
    the slope is then -inf.
    """
    vals = np.asarray(values, dtype=float)
    if np.any(vals <= 1e-300):
        return float("-inf")
    logs = np.log(vals)
    t = np.asarray(ts, dtype=float)
    t_c = t - t.mean()
    denom = np.dot(t_c, t_c)
    if denom == 0.0:
        return 0.0
    return float(np.dot(t_c, logs - logs.mean()) / denom)


def positive_real_root(
    kernel: KernelSpec,
    s_max: float | None = None,
    samples: int = 400,
    tol: float = 1e-6,
) -> float | None:
    """Smallest root of det H(s) on (0, s_max] found by scan + bisection.

    Real roots satisfy s <= sup ||F||, so the default scan range uses the
    kernel sup-norm estimate with margin.
    """
    if s_max is None:
        s_max = max(2.0 * kernel.sup_norm(), 5.0 / kernel.h)

    def det_at(s: float) -> float:
        return float(np.real(np.linalg.det(char_matrix(kernel, s))))

    grid = np.linspace(1e-9, s_max, samples)
    vals = np.array([det_at(s) for s in grid])
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            return float(grid[i])
        if vals[i] * vals[i + 1] < 0.0:
            lo, hi = grid[i], grid[i + 1]
            flo = vals[i]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fmid = det_at(mid)
                if flo * fmid <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            return float(0.5 * (lo + hi))
    return None


@dataclass(frozen=True)
class OracleVerdict:
    """Advisory stability label with the evidence that produced it."""

    label: str  # "stable" | "unstable" | "marginal"
    slopes: tuple[float, ...]
    real_root: float | None
    imag_margin: float
    seed: int = 0
    notes: str = ""


def stability_oracle(
    kernel: KernelSpec,
    trials: int,
    horizon: float,
    step: float,
    growth_band: float = 0.05,
    seed: int = 0,
    s_max: float | None = None,
    imag_margin_tol: float = 1e-6,
    omega_max: float | None = None,
) -> OracleVerdict:
    """Simulation plus root-screen stability label.

    Unstable when any trajectory grows faster than `growth_band` per unit
    time or a positive real root exists; stable when all trajectories
    decay faster than the band and the screens find nothing; marginal
    otherwise.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    root = positive_real_root(kernel, s_max=s_max)
    if omega_max is None:
        omega_max = max(8.0 * np.pi / kernel.h, 2.0 * kernel.sup_norm())
    margin, _ = imaginary_axis_margin(kernel, omega_max, 600)

    slopes = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        phi = random_phi(kernel, rng, step)
        x = solve_ide(kernel, phi, horizon, step)
        win = kernel.h
        t_marks = np.arange(horizon / 2, horizon + 1e-12, win / 2)
        norms = []
        for t in t_marks:
            i1 = x.node_index(round(t / step) * step)
            i0 = max(0, i1 - num_steps(win, step))
            norms.append(float(np.max(np.linalg.norm(x.samples[i0 : i1 + 1], axis=(1, 2)))))
        slopes.append(fit_log_slope(t_marks, np.array(norms)))
    slopes = tuple(slopes)

    if root is not None or any(s > growth_band for s in slopes):
        label = "unstable"
    elif (
        all(s < -growth_band for s in slopes)
        and root is None
        and margin > imag_margin_tol
    ):
        label = "stable"
    else:
        label = "marginal"
    return OracleVerdict(
        label=label, slopes=slopes, real_root=root, imag_margin=margin, seed=seed
    )
