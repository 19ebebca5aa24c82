"""Delay Lyapunov matrix U on [-2h, 2h] by two independent constructions.

The direct method truncates the defining integral
U(tau) = integral_0^inf (K(t) - K0)^T W K(t + tau) dt and only makes
sense when the fundamental matrix decays.  The collocation method solves
the dynamic property U(tau) = integral U(tau + theta) F(theta) d theta
together with the negative-side relation
U(tau) = integral F^T(theta) U(tau - theta) d theta + W S - tau W K0
as a dense least-squares system for U at the nodes of [0, h], then
marches the dynamic property forward to 2h.  Negative arguments are never
stored: evaluation always folds through the symmetry property
U(-tau) = U^T(tau) + P - tau K0^T W K0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, IllConditioned, NonDecayingTail, OutOfRange
from .fundamental import _end_weight_inverse
from .grids import GridFunction, num_steps, trapezoid_weights
from .kernel import KernelConstants, KernelSpec

_CONDITION_LIMIT = 1e10
_RANGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)  # identity-based equality: tables are unique
class LyapunovTable:
    """U sampled at tau = k * h/N, k = 0..2N, with fold-based evaluation."""

    kernel: KernelSpec
    constants: KernelConstants
    grid: GridFunction
    method: str  # "direct" | "collocation"
    diagnostics: dict

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def h(self) -> float:
        return self.kernel.h

    def u(self, tau: float) -> np.ndarray:
        """U(tau) for |tau| <= 2h; tau < 0 goes through the symmetry fold."""
        lim = 2.0 * self.h
        if tau < -lim - _RANGE_TOL or tau > lim + _RANGE_TOL:
            raise OutOfRange(f"tau={tau} outside [-2h, 2h]")
        tau = min(max(tau, -lim), lim)
        if tau >= 0.0:
            return self.grid(tau)
        return (
            self.grid(-tau).T
            + self.constants.p
            + tau * self.constants.k0_w_k0
        )

    def u_second(self, tau: float) -> np.ndarray:
        """Central second difference of U with the table step, negative side.

        Valid for tau in [-2h + step, -step]; U is smooth on each side of
        zero only, so the stencil never crosses zero.
        """
        d = self.step
        if tau < -2.0 * self.h + d - _RANGE_TOL or tau > -d + _RANGE_TOL:
            raise OutOfRange(
                f"tau={tau} outside [-2h + step, -step] for the second difference"
            )
        return (self.u(tau + d) - 2.0 * self.u(tau) + self.u(tau - d)) / d**2

    def u_second_negative_samples(self) -> np.ndarray:
        """U'' at grid arguments a * step, a = -2N..0; index [a + 2N].

        The boundary arguments -2h and 0 clamp to the nearest interior
        stencil (U'' is bounded there, the clamp costs one O(step) end
        value under an O(step) quadrature weight).
        """
        two_n = self.grid.samples.shape[0] - 1
        d = self.step
        out = np.empty((two_n + 1, self.kernel.n, self.kernel.n))
        for a in range(-two_n + 1, 0):
            out[a + two_n] = self.u_second(a * d)
        out[0] = out[1]
        out[two_n] = out[two_n - 1]
        return out

    def u_second_one_sided_at_minus_h(self) -> tuple[np.ndarray, np.ndarray]:
        """(left, right) limits of U'' at tau = -h by 4-point one-sided
        second differences.

        U'' jumps at -h (the weak derivative of K jumps at h); quadratures
        whose integration range ends exactly where the argument reaches -h
        need the one-sided limit rather than the central-difference mean.
        """
        d = self.step
        h = self.h

        def stencil(x0: float, sign: float) -> np.ndarray:
            f0 = self.u(x0)
            f1 = self.u(x0 + sign * d)
            f2 = self.u(x0 + 2 * sign * d)
            f3 = self.u(x0 + 3 * sign * d)
            return (2 * f0 - 5 * f1 + 4 * f2 - f3) / d**2

        return stencil(-h, -1.0), stencil(-h, +1.0)

    def u_prime_samples(self) -> np.ndarray:
        """U' at grid arguments a * step, a = -2N..2N, by central
        differences; index [a + 2N].

        At a = 0 the central difference equals the mean of the one-sided
        limits of U', which is the right value for quadratures whose node
        sits on the jump; the range ends use one-sided differences.
        """
        two_n = self.grid.samples.shape[0] - 1
        d = self.step
        out = np.empty((2 * two_n + 1, self.kernel.n, self.kernel.n))
        for a in range(-two_n, two_n + 1):
            if a == -two_n:
                out[0] = (self.u((a + 1) * d) - self.u(a * d)) / d
            elif a == two_n:
                out[-1] = (self.u(a * d) - self.u((a - 1) * d)) / d
            else:
                out[a + two_n] = (self.u((a + 1) * d) - self.u((a - 1) * d)) / (2 * d)
        return out


def u_eval(table: LyapunovTable, tau: float) -> np.ndarray:
    return table.u(tau)


def u_second_derivative(table: LyapunovTable, tau: float) -> np.ndarray:
    return table.u_second(tau)


# -- direct construction -------------------------------------------------------


def lyapunov_direct(
    kernel: KernelSpec,
    constants: KernelConstants,
    k: GridFunction,
    n_nodes: int,
) -> LyapunovTable:
    """Truncated defining integral on each tau node of [0, 2h].

    K must cover [0, T + 2h]; the integral truncates at T.  Raises
    NonDecayingTail when ||K|| does not contract by 1e-3 over the second
    half of the horizon (the defining integral is then meaningless).
    """
    h = kernel.h
    d_u = h / n_nodes
    q = num_steps(d_u, k.step)  # table step as a multiple of the K step
    t_end = k.t1
    if t_end < 4.0 * h:
        raise ValueError("K horizon too short for the direct construction")

    norms = np.linalg.norm(k.samples, axis=(1, 2))
    m_h = num_steps(h, k.step)
    half = k.samples.shape[0] // 2
    den = float(np.max(norms[half : half + m_h + 1]))
    num = float(np.max(norms[-(m_h + 1) :]))
    if den > 1e-300 and num > 1e-3 * den:
        raise NonDecayingTail(
            f"||K|| contracted only by {num / den:.2e} over [T/2, T]; "
            "the system is not exponentially stable enough to truncate"
        )

    total = k.samples.shape[0] - 1
    m_int = total - 2 * n_nodes * q  # integrate t over [0, T - 2h]
    w = trapezoid_weights(m_int + 1, k.step)
    left = np.einsum("tba,bc->tac", k.samples[: m_int + 1] - constants.k0, constants.w)
    samples = np.empty((2 * n_nodes + 1, kernel.n, kernel.n))
    for idx in range(2 * n_nodes + 1):
        shift = idx * q
        samples[idx] = np.einsum(
            "t,tab,tbc->ac", w, left, k.samples[shift : shift + m_int + 1]
        )
    grid = GridFunction(0.0, 2.0 * h, d_u, samples)
    diagnostics = {
        "tail_ratio": num / den if den > 0 else 0.0,
        "tail_sup": num,
        "truncation": (t_end - 2.0 * h),
    }
    return LyapunovTable(kernel, constants, grid, "direct", diagnostics)


# -- collocation construction --------------------------------------------------


def _transpose_permutation(n: int) -> np.ndarray:
    t = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            t[a * n + b, b * n + a] = 1.0
    return t


def lyapunov_collocate(
    kernel: KernelSpec,
    constants: KernelConstants,
    n_nodes: int,
) -> LyapunovTable:
    """Least-squares collocation of the dynamic and negative-side
    properties on [0, h], then forward marching to 2h.

    Works at unstable parameter points where the defining integral
    diverges.  Raises IllConditioned when the stacked system has condition
    above 1e10 (the Lyapunov matrix may not exist or not be unique).
    """
    if n_nodes < 20:
        raise ValueError("collocation needs at least 20 nodes on [0, h]")
    n = kernel.n
    h = kernel.h
    d = h / n_nodes
    for piece in kernel.pieces[:-1]:
        num_steps(piece.hi + h, d)  # breakpoints must sit on table nodes

    nn = n * n
    count = n_nodes + 1
    f_grid = kernel.sample_grid(n_nodes)
    w_q = trapezoid_weights(count, d)
    t_perm = _transpose_permutation(n)
    eye_nn = np.eye(nn)
    p = constants.p
    c0 = constants.k0_w_k0
    ws = constants.w @ constants.s
    wk0 = constants.w @ constants.k0

    a_mat = np.zeros((2 * count * nn, count * nn))
    b_vec = np.zeros(2 * count * nn)

    def right_mult_map(f: np.ndarray) -> np.ndarray:
        # vec_r(X F) = (I kron F^T) vec_r(X)
        return np.kron(np.eye(n), f.T)

    def left_mult_map(f: np.ndarray) -> np.ndarray:
        # vec_r(F^T X) = (F^T kron I) vec_r(X)
        return np.kron(f.T, np.eye(n))

    # dynamic property at tau = i * d, i = 0..N
    for i in range(count):
        rows = slice(i * nn, (i + 1) * nn)
        a_mat[rows, i * nn : (i + 1) * nn] += eye_nn
        rhs = np.zeros((n, n))
        for j in range(count):
            arg = i + j - n_nodes
            block = right_mult_map(f_grid[j]) * w_q[j]
            if arg >= 0:
                a_mat[rows, arg * nn : (arg + 1) * nn] -= block
            else:
                a_mat[rows, -arg * nn : (-arg + 1) * nn] -= block @ t_perm
                rhs += w_q[j] * ((p + arg * d * c0) @ f_grid[j])
        b_vec[rows] += rhs.reshape(-1)

    # negative-side property at tau = -k * d, k = 0..N
    base = count * nn
    for kk in range(count):
        rows = slice(base + kk * nn, base + (kk + 1) * nn)
        rhs = ws + kk * d * wk0
        if kk == 0:
            a_mat[rows, :nn] += eye_nn
        else:
            a_mat[rows, kk * nn : (kk + 1) * nn] += t_perm
            rhs -= p - kk * d * c0
        for j in range(count):
            arg = n_nodes - kk - j
            block = left_mult_map(f_grid[j]) * w_q[j]
            if arg >= 0:
                a_mat[rows, arg * nn : (arg + 1) * nn] -= block
            else:
                a_mat[rows, -arg * nn : (-arg + 1) * nn] -= block @ t_perm
                rhs += w_q[j] * (f_grid[j].T @ (p + arg * d * c0))
        b_vec[rows] += rhs.reshape(-1)

    solution, _, _, sing = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    cond = float(sing[0] / sing[-1]) if sing[-1] > 0 else np.inf
    if cond > _CONDITION_LIMIT:
        raise IllConditioned(
            f"collocation system condition {cond:.2e} exceeds {_CONDITION_LIMIT:.0e}; "
            "the Lyapunov matrix may not exist or be unique (eigenvalues "
            "symmetric with respect to zero)"
        )
    residual = a_mat @ solution - b_vec
    ls_res = float(np.max(np.abs(residual))) if residual.size else 0.0

    samples = np.empty((2 * n_nodes + 1, n, n))
    for i in range(count):
        samples[i] = solution[i * nn : (i + 1) * nn].reshape(n, n)

    # march the dynamic property forward on (h, 2h]
    inv = _end_weight_inverse(kernel, d)
    for i in range(count, 2 * n_nodes + 1):
        acc = np.zeros((n, n))
        for j in range(n_nodes):
            wgt = 0.5 * d if j == 0 else d
            acc += wgt * samples[i - n_nodes + j] @ f_grid[j]
        samples[i] = acc @ inv

    grid = GridFunction(0.0, 2.0 * h, d, samples)
    sym_defect = float(np.linalg.norm(samples[0] - samples[0].T - p))
    diagnostics = {
        "condition": cond,
        "ls_residual": ls_res,
        "symmetry_defect": sym_defect,
    }
    return LyapunovTable(kernel, constants, grid, "collocation", diagnostics)


# -- property residuals ---------------------------------------------------------


@dataclass(frozen=True)
class LyapunovResiduals:
    """Max-norm defects of the Lyapunov-matrix identities."""

    dynamic: float            # U(tau) = int U(tau+theta) F(theta), tau in [0, h]
    symmetry_at_zero: float   # U(0) - U^T(0) - P
    alg_left: float           # relation with W S - W int_0^tau K, tau in [-h, h]
    alg_right: float          # relation with int (K - K0)^T W, tau in [-h, h]
    derivative: float         # U'(tau) = int F^T U'(tau-theta) - W K(tau)
    cross_fundamental: float  # two-argument relation tying U, U', K


def _cumtrapz(samples: np.ndarray, step: float) -> np.ndarray:
    out = np.cumsum(samples * step, axis=0)
    out -= 0.5 * step * (samples + samples[0])
    return out


def _k_one_sided(k: GridFunction, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(left, right) limit values of K at quadrature nodes.

    K jumps by the identity at t = 0; products of jumpy factors must be
    averaged as products of one-sided limits, not products of averages.
    """
    vals = k(times)
    left = vals.copy()
    right = vals
    if k.left_extension is not None:
        on_jump = np.abs(times) < 1e-9 * max(1.0, k.t1)
        if np.any(on_jump):
            left[on_jump] = k.left_extension
            right = vals.copy()
            right[on_jump] = k.samples[0]
    return left, right


def u_fold_samples(table: LyapunovTable) -> np.ndarray:
    """U at all grid arguments a * step, a = -2N..2N; index [a + 2N]."""
    two_n = table.grid.samples.shape[0] - 1
    d = table.step
    out = np.empty((2 * two_n + 1,) + table.grid.shape)
    out[two_n:] = table.grid.samples
    for a in range(-two_n, 0):
        out[a + two_n] = table.u(a * d)
    return out


def property_residuals(
    table: LyapunovTable, kernel: KernelSpec, k: GridFunction
) -> LyapunovResiduals:
    """Evaluate the identity set on the table nodes, all by trapezoid."""
    n_nodes = num_steps(table.h, table.step)
    d = table.step
    try:
        q = num_steps(d, k.step)
    except GridMismatch as exc:
        raise GridMismatch(
            f"the table step h/N = {d} must be an integer multiple of the "
            f"fundamental-matrix step {k.step}"
        ) from exc
    f_grid = kernel.sample_grid(n_nodes)
    w_q = trapezoid_weights(n_nodes + 1, d)
    cst = table.constants
    u_all = u_fold_samples(table)
    two_n = 2 * n_nodes

    # dynamic property on [0, h]
    res_dyn = 0.0
    for i in range(n_nodes + 1):
        win = u_all[i + n_nodes : i + two_n + 1]
        acc = np.einsum("j,jab,jbc->ac", w_q, win, f_grid)
        res_dyn = max(res_dyn, float(np.linalg.norm(u_all[i + two_n] - acc)))

    sym0 = float(np.linalg.norm(table.u(0.0) - table.u(0.0).T - cst.p))

    # integral of K and of (K - K0)^T on the table nodes
    k_cum = _cumtrapz(k.samples, k.step)
    kk0_cum = _cumtrapz(np.transpose(k.samples, (0, 2, 1)) - cst.k0.T, k.step)

    res_left = 0.0
    res_right = 0.0
    for a in range(-n_nodes, n_nodes + 1):
        tau = a * d
        # args a + N - j for j ascending: reversed window u_all[a .. a+N]
        win_rev = u_all[a + two_n : a + n_nodes + two_n + 1][::-1]
        acc_l = np.einsum("j,jba,jbc->ac", w_q, f_grid, win_rev)
        int_k = k_cum[a * q] if a >= 0 else tau * cst.k0
        lhs_l = acc_l + cst.w @ cst.s - cst.w @ int_k
        res_left = max(res_left, float(np.linalg.norm(u_all[a + two_n] - lhs_l)))

        win = u_all[a + n_nodes : a + two_n + 1]
        acc_r = np.einsum("j,jab,jbc->ac", w_q, win, f_grid)
        int_kk0 = -kk0_cum[-a * q] if a < 0 else np.zeros((kernel.n, kernel.n))
        lhs_r = acc_r + int_kk0 @ cst.w
        res_right = max(res_right, float(np.linalg.norm(u_all[a + two_n] - lhs_r)))

    # derivative relation, tau in [-h + d, h - d] away from zero
    up = table.u_prime_samples()
    res_der = 0.0
    for a in range(-n_nodes + 1, n_nodes):
        if a == 0:
            continue
        win_rev = up[a + two_n : a + n_nodes + two_n + 1][::-1]
        acc = np.einsum("j,jba,jbc->ac", w_q, f_grid, win_rev)
        k_tau = k.samples[a * q] if a >= 0 else cst.k0
        lhs = acc - cst.w @ k_tau
        res_der = max(res_der, float(np.linalg.norm(up[a + two_n] - lhs)))

    # two-argument relation with the fundamental matrix (5 x 5 sample)
    res_cross = 0.0
    xi_nodes = (np.arange(n_nodes + 1) - n_nodes) * d
    marks = [max(1, round(n_nodes * frac)) for frac in (0.2, 0.4, 0.6, 0.8, 1.0)]
    for i1 in marks:
        for i2 in marks:
            tau1, tau2 = i1 * d, i2 * d
            k1_l, k1_r = _k_one_sided(k, tau1 + xi_nodes)
            k2_l, k2_r = _k_one_sided(k, tau2 + xi_nodes)
            prod_l = np.einsum("jba,bc,jcd->jad", k1_l - cst.k0, cst.w, k2_l)
            prod_r = np.einsum("jba,bc,jcd->jad", k1_r - cst.k0, cst.w, k2_r)
            prod = 0.5 * (prod_l + prod_r)
            # range endpoints take the one-sided interior limit, not the mean
            prod[0] = prod_r[0]
            prod[-1] = prod_l[-1]
            acc = np.einsum("j,jad->ad", w_q, prod)
            k2_mean = 0.5 * (k2_l + k2_r)
            k2_mean[0] = k2_r[0]
            k2_mean[-1] = k2_l[-1]
            for jxi in range(1, n_nodes + 1):
                w_in = trapezoid_weights(jxi + 1, d)
                up_win = up[-i1 - jxi + two_n : -i1 + two_n + 1]
                inner = np.einsum("j,jab,jbc->ac", w_in, up_win, f_grid[: jxi + 1])
                acc += w_q[jxi] * inner @ k2_mean[jxi]
            res_cross = max(
                res_cross, float(np.linalg.norm(table.u(tau2 - tau1) - acc))
            )

    return LyapunovResiduals(
        dynamic=res_dyn,
        symmetry_at_zero=sym0,
        alg_left=res_left,
        alg_right=res_right,
        derivative=res_der,
        cross_fundamental=res_cross,
    )


def second_derivative_residual(
    table: LyapunovTable, kernel: KernelSpec, kprime: GridFunction
) -> float:
    """Defect of U''(tau) = int U''(tau+theta) F(theta) - K'^T(-tau) W
    over tau in (-h, 0), sampled at interior table nodes."""
    n_nodes = num_steps(table.h, table.step)
    d = table.step
    f_grid = kernel.sample_grid(n_nodes)
    w_q = trapezoid_weights(n_nodes + 1, d)
    upp = table.u_second_negative_samples()
    two_n = 2 * n_nodes
    worst = 0.0
    for a in range(-n_nodes + 1, 0):
        win = upp[a + n_nodes : a + two_n + 1]
        acc = np.einsum("j,jab,jbc->ac", w_q, win, f_grid)
        lhs = acc - kprime(-a * d).T @ table.constants.w
        worst = max(worst, float(np.linalg.norm(upp[a + two_n] - lhs)))
    return worst
