"""Quadratic functionals built on the Lyapunov matrix.

Q(xi1, xi2) combines the second derivative of U with one and two kernel
integrals; it stays meaningful for unstable systems, which is what makes
the criterion usable everywhere in parameter space.  The functionals

    v0(phi)  = double integral of phi^T Q phi
    v1(phi)  = v0(phi) + integral of phi^T W phi
    z(phi, psi) the corresponding bilinear form

are evaluated by trapezoid on the table node set.  Special initial
functions psi(theta) = sum_i (K(tau_i + theta) - K0) gamma_i collapse v1
to a finite quadratic form; the backward recursion that interpolates an
arbitrary phi by such a psi is also here.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, OutOfRange
from .grids import GridFunction, num_steps, trapezoid_weights
from .kernel import KernelSpec
from .lyapunov import LyapunovTable

_q_grids: "weakref.WeakKeyDictionary[LyapunovTable, np.ndarray]" = (
    weakref.WeakKeyDictionary()
)


def q_grid(table: LyapunovTable, kernel: KernelSpec) -> np.ndarray:
    """Q at all node pairs (xi_i, xi_j) of [-h, 0]^2; shape (N+1, N+1, n, n).

    Built once per table and cached; every v0 / v1 / z evaluation reuses
    it.  Node xi_i = -h + i * step.
    """
    cached = _q_grids.get(table)
    if cached is not None:
        return cached

    n_nodes = num_steps(table.h, table.step)
    d = table.step
    n = kernel.n
    f_grid = kernel.sample_grid(n_nodes)
    upp = table.u_second_negative_samples()  # index [a + 2N], a = -2N..0
    two_n = 2 * n_nodes

    # inner_j[t] = sum_l w_l U''((t - j + l - N) d) F(theta_l), l = 0..j
    upp_left_mh, upp_right_mh = table.u_second_one_sided_at_minus_h()
    upp_mean_mh = upp[n_nodes]  # central difference at the jump -h
    inner = np.zeros((n_nodes + 1, n_nodes + 1, n, n))
    for j in range(1, n_nodes + 1):
        w_j = trapezoid_weights(j + 1, d)
        for t in range(n_nodes + 1):
            start = t - j - n_nodes + two_n
            win = upp[start : start + j + 1]
            inner[j, t] = np.einsum("l,lab,lbc->ac", w_j, win, f_grid[: j + 1])
        # the U'' argument reaches its jump at -h exactly at a theta
        # endpoint when t = j (lower end) or t = 0 (upper end); endpoints
        # take the one-sided limit, not the central-difference mean
        inner[j, j] += w_j[0] * (upp_right_mh - upp_mean_mh) @ f_grid[0]
        inner[j, 0] += w_j[j] * (upp_left_mh - upp_mean_mh) @ f_grid[j]

    grid = np.zeros((n_nodes + 1, n_nodes + 1, n, n))
    for j in range(n_nodes + 1):
        inner_j = inner[j]
        for i in range(n_nodes + 1):
            acc = -inner_j[i]
            if i < n_nodes:
                v_i = trapezoid_weights(n_nodes - i + 1, d)
                # theta_1 runs over nodes p = i..N; inner index i + N - p
                win = inner_j[i : n_nodes + 1][::-1]
                acc += np.einsum("p,pba,pbc->ac", v_i, f_grid[i:], win)
            grid[i, j] = acc

    grid.setflags(write=False)
    _q_grids[table] = grid
    return grid


def q_eval(
    table: LyapunovTable, kernel: KernelSpec, xi1: float, xi2: float
) -> np.ndarray:
    """Q(xi1, xi2) for xi in [-h, 0]; off-node arguments interpolate the
    node grid bilinearly (U'' only exists at node-aligned arguments)."""
    h = table.h
    tol = 1e-9 * max(1.0, h)
    if not (-h - tol <= xi1 <= tol and -h - tol <= xi2 <= tol):
        raise OutOfRange(f"xi=({xi1}, {xi2}) outside [-h, 0]^2")
    grid = q_grid(table, kernel)
    n_nodes = grid.shape[0] - 1
    out = np.empty((kernel.n, kernel.n))
    pos1 = np.clip((xi1 + h) / table.step, 0, n_nodes)
    pos2 = np.clip((xi2 + h) / table.step, 0, n_nodes)
    i1, i2 = int(min(pos1, n_nodes - 1)), int(min(pos2, n_nodes - 1))
    f1, f2 = pos1 - i1, pos2 - i2
    out = (
        (1 - f1) * (1 - f2) * grid[i1, i2]
        + f1 * (1 - f2) * grid[i1 + 1, i2]
        + (1 - f1) * f2 * grid[i1, i2 + 1]
        + f1 * f2 * grid[i1 + 1, i2 + 1]
    )
    return out


def _check_phi_grid(table: LyapunovTable, phi: GridFunction) -> None:
    if abs(phi.t0 + table.h) > 1e-9 or abs(phi.t1) > 1e-9:
        raise GridMismatch("phi must be sampled on [-h, 0]")
    if abs(phi.step - table.step) > 1e-9 * table.step:
        raise GridMismatch(
            f"phi step {phi.step} must match the table step {table.step}"
        )


def z_eval(
    table: LyapunovTable,
    kernel: KernelSpec,
    phi: GridFunction,
    psi: GridFunction,
) -> float:
    """Bilinear functional z(phi, psi) by double trapezoid on the node set."""
    _check_phi_grid(table, phi)
    _check_phi_grid(table, psi)
    grid = q_grid(table, kernel)
    w = trapezoid_weights(grid.shape[0], table.step)
    a = phi.samples[:, :, 0]
    b = psi.samples[:, :, 0]
    quad = float(np.einsum("i,j,ia,ijab,jb->", w, w, a, grid, b))
    weight = float(np.einsum("i,ia,ab,ib->", w, a, table.constants.w, b))
    return quad + weight


def v1_eval(table: LyapunovTable, kernel: KernelSpec, phi: GridFunction) -> float:
    """v1(phi) = v0(phi) + integral of phi^T W phi."""
    return z_eval(table, kernel, phi, phi)


def v0_eval(table: LyapunovTable, kernel: KernelSpec, phi: GridFunction) -> float:
    """v0(phi), the part of v1 built on Q alone."""
    _check_phi_grid(table, phi)
    grid = q_grid(table, kernel)
    w = trapezoid_weights(grid.shape[0], table.step)
    a = phi.samples[:, :, 0]
    return float(np.einsum("i,j,ia,ijab,jb->", w, w, a, grid, a))


# -- special initial functions --------------------------------------------------


@dataclass(frozen=True)
class SpecialFunction:
    """psi(theta) = sum_i (K(tau_i + theta) - K0) gamma_i on [-h, 0)."""

    taus: tuple[float, ...]
    gammas: tuple[np.ndarray, ...]
    k: GridFunction

    def __post_init__(self):
        if len(self.taus) < 1 or len(self.taus) != len(self.gammas):
            raise ValueError("need matching nonempty tau and gamma lists")
        if any(t2 <= t1 for t1, t2 in zip(self.taus, self.taus[1:])):
            raise ValueError("tau points must be strictly increasing")

    def value(self, theta: float) -> np.ndarray:
        """Pointwise value, right-continuous at the jump points -tau_i
        (follows the convention of K at zero).  Arguments within rounding
        of a jump clamp onto it so grid nodes classify robustly."""
        k0 = self.k.left_extension
        tol = 1e-12 * max(1.0, self.taus[-1])
        acc = np.zeros(k0.shape[0])
        for tau, gamma in zip(self.taus, self.gammas):
            arg = tau + theta
            if abs(arg) <= tol:
                arg = 0.0
            if arg >= 0.0:
                acc = acc + (self.k(arg) - k0) @ gamma
        return acc

    def to_grid(self, step: float, h: float) -> GridFunction:
        """Pointwise samples; jump nodes carry the right-continuous value,
        following the convention of K at zero."""
        m = num_steps(h, step)
        k0 = self.k.left_extension
        samples = np.zeros((m + 1, k0.shape[0], 1))
        for j in range(m + 1):
            samples[j, :, 0] = self.value(-h + j * step)
        return GridFunction(-h, 0.0, step, samples)

    def to_quadrature_grid(self, step: float, h: float) -> GridFunction:
        """Samples for trapezoid quadrature: nodes landing exactly on a
        jump carry the mean of the one-sided limits (the support edge -h
        keeps the one-sided interior value), which preserves second-order
        accuracy of integrals across the jumps."""
        grid = self.to_grid(step, h)
        samples = grid.samples.copy()
        tol = 1e-9 * max(1.0, h)
        m = samples.shape[0] - 1
        for j in range(1, m + 1):
            theta = -h + j * step
            for tau, gamma in zip(self.taus, self.gammas):
                if abs(tau + theta) <= tol:
                    samples[j, :, 0] -= 0.5 * gamma
        return GridFunction(-h, 0.0, step, samples)


def v1_special(table: LyapunovTable, kernel: KernelSpec, psi: SpecialFunction) -> float:
    """v1 on a special function with jump-exact quadrature.

    The Q double integral sees each jump of psi in one variable at a time,
    so mean-at-jump samples keep second order there.  The weight term
    integrates psi^T W psi, where both factors jump together: its node
    values must be means of one-sided products, not products of means.
    """
    step = table.step
    h = kernel.h
    grid = psi.to_quadrature_grid(step, h)
    quad_part = v0_eval(table, kernel, grid)

    right = psi.to_grid(step, h).samples[:, :, 0]
    w_mat = table.constants.w
    products = np.einsum("ja,ab,jb->j", right, w_mat, right)
    tol = 1e-9 * max(1.0, h)
    m = right.shape[0] - 1
    for j in range(1, m + 1):
        theta = -h + j * step
        for tau, gamma in zip(psi.taus, psi.gammas):
            if abs(tau + theta) <= tol:
                left = right[j] - gamma
                products[j] = 0.5 * (
                    left @ w_mat @ left + right[j] @ w_mat @ right[j]
                )
    w_q = trapezoid_weights(m + 1, step)
    return quad_part + float(np.dot(w_q, products))


def build_special(
    k: GridFunction,
    kernel: KernelSpec,
    taus,
    gammas,
) -> SpecialFunction:
    """Assemble a special function from tau points in (0, h] and vectors."""
    taus = tuple(float(t) for t in taus)
    if any(not (0.0 < t <= kernel.h + 1e-12) for t in taus):
        raise ValueError("tau points must lie in (0, h]")
    gammas = tuple(np.asarray(g, dtype=float).reshape(kernel.n) for g in gammas)
    return SpecialFunction(taus=taus, gammas=gammas, k=k)


def approximate_by_special(
    k: GridFunction,
    kernel: KernelSpec,
    phi: GridFunction,
    r: int,
) -> SpecialFunction:
    """Interpolate phi at the equidistant points -tau_k, tau_k = k h / r,
    by a special function, via the backward recursion

        gamma_r = phi(-h),
        gamma_k = phi(-tau_k) - sum_{i>k} (K(tau_i - tau_k) - K0) gamma_i.
    """
    if r < 1:
        raise ValueError("need r >= 1")
    h = kernel.h
    taus = [i * h / r for i in range(1, r + 1)]
    k0 = k.left_extension
    gammas: list[np.ndarray] = [np.zeros(kernel.n)] * r
    gammas[r - 1] = phi(-h)[:, 0]
    for kk in range(r - 1, 0, -1):
        acc = phi(-taus[kk - 1])[:, 0].copy()
        for i in range(kk, r):
            acc -= (k(taus[i] - taus[kk - 1]) - k0) @ gammas[i]
        gammas[kk - 1] = acc
    return SpecialFunction(taus=tuple(taus), gammas=tuple(gammas), k=k)
