"""Piecewise-polynomial kernels and the constants derived from them.

The kernel F maps [-h, 0] to n x n matrices and is represented piecewise:
on each sub-interval F(theta) = sum_k A_k theta^k.  The class is rich
enough for the standard benchmark families (affine scalar kernels,
constant matrix kernels) while keeping moments and the characteristic
matrix in closed form.

Evaluation follows the quadrature convention: outside [-h, 0] the
extension is zero, at breakpoints interior to (-h, 0) the mean of the
one-sided limits is returned, and at the support edges -h and 0 the
one-sided piece value is returned.  `evaluate_jump_mean` averages at the
support edges as well; marching schemes use it for point values of the
extension that end up as nodes of later quadratures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularAtZero

#: |s| below which the characteristic-matrix integrals switch to a series;
#: at the switch the recurrence's cancellation error (~eps / |s|^(k+1)) and
#: the 6-term series truncation (~|s|^6 / 720) are both below 1e-12
_SERIES_SWITCH = 1e-2
_SERIES_TERMS = 6
#: condition number above which (moment0 - I) counts as singular
_SINGULAR_COND = 1e12

_BREAK_TOL = 1e-9


@dataclass(frozen=True)
class Piece:
    """One polynomial piece: F(theta) = sum_k coeffs[k] * theta^k on [lo, hi]."""

    lo: float
    hi: float
    coeffs: np.ndarray  # shape (degree + 1, n, n)

    def value(self, theta: float) -> np.ndarray:
        acc = np.zeros_like(self.coeffs[0])
        for a_k in self.coeffs[::-1]:
            acc = acc * theta + a_k
        return acc


@dataclass(frozen=True)
class KernelSpec:
    """Piecewise-polynomial kernel on [-h, 0] with zero extension outside."""

    n: int
    h: float
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension n must be >= 1")
        if not self.h > 0:
            raise ValueError("delay h must be > 0")
        if not self.pieces:
            raise ValueError("kernel needs at least one piece")
        tol = _BREAK_TOL * max(1.0, self.h)
        lo = -self.h
        for i, p in enumerate(self.pieces):
            if abs(p.lo - lo) > tol:
                raise ValueError(
                    f"piece {i} starts at {p.lo}, expected {lo}: pieces must "
                    "partition [-h, 0] with increasing sub-intervals"
                )
            if not p.hi > p.lo:
                raise ValueError(f"piece {i} has empty interval [{p.lo}, {p.hi}]")
            if p.coeffs.ndim != 3 or p.coeffs.shape[1:] != (self.n, self.n):
                raise ValueError(f"piece {i} coefficients must be (k, n, n)")
            if not np.all(np.isfinite(p.coeffs)):
                raise ValueError(f"piece {i} has non-finite coefficients")
            p.coeffs.setflags(write=False)
            lo = p.hi
        if abs(lo) > tol:
            raise ValueError("pieces must end exactly at 0")

    # -- evaluation ------------------------------------------------------

    def _piece_index(self, theta: float) -> int:
        for i, p in enumerate(self.pieces):
            if theta <= p.hi:
                return i
        return len(self.pieces) - 1

    def evaluate(self, theta: float) -> np.ndarray:
        """The extension of F: F(theta) on [-h, 0], zero elsewhere.

        Interior breakpoints return the mean of the one-sided limits; the
        support edges return the adjacent piece value.
        """
        tol = _BREAK_TOL * max(1.0, self.h)
        if theta < -self.h - tol or theta > tol:
            return np.zeros((self.n, self.n))
        theta = min(max(theta, -self.h), 0.0)
        i = self._piece_index(theta)
        piece = self.pieces[i]
        if i + 1 < len(self.pieces) and abs(theta - piece.hi) <= tol:
            return 0.5 * (piece.value(theta) + self.pieces[i + 1].value(theta))
        return piece.value(theta)

    def evaluate_jump_mean(self, theta: float) -> np.ndarray:
        """Like `evaluate`, but also averages with the outside zero at the
        support edges -h and 0."""
        tol = _BREAK_TOL * max(1.0, self.h)
        val = self.evaluate(theta)
        if abs(theta + self.h) <= tol or abs(theta) <= tol:
            return 0.5 * val
        return val

    def evaluate_right(self, theta: float) -> np.ndarray:
        """Right limit of the extension of F at theta."""
        tol = _BREAK_TOL * max(1.0, self.h)
        if theta < -self.h - tol or theta >= -tol:
            return np.zeros((self.n, self.n))
        theta = max(theta, -self.h)
        i = self._piece_index(theta)
        piece = self.pieces[i]
        if i + 1 < len(self.pieces) and abs(theta - piece.hi) <= tol:
            return self.pieces[i + 1].value(theta)
        return piece.value(theta)

    def value_at_zero(self) -> np.ndarray:
        """Left limit F(0-), the end-weight of the marching schemes."""
        return self.pieces[-1].value(0.0)

    def value_at_minus_h(self) -> np.ndarray:
        """Right limit F(-h+)."""
        return self.pieces[0].value(-self.h)

    def sample_grid(self, m: int) -> np.ndarray:
        """F sampled at -h + j*h/m, j = 0..m, under the quadrature
        convention (one-sided values at the edges)."""
        step = self.h / m
        out = np.empty((m + 1, self.n, self.n))
        out[0] = self.value_at_minus_h()
        out[m] = self.value_at_zero()
        for j in range(1, m):
            out[j] = self.evaluate(-self.h + j * step)
        return out

    # -- closed-form integrals -------------------------------------------

    def moment(self, power: int) -> np.ndarray:
        """integral over [-h, 0] of theta^power * F(theta) d theta, exact."""
        acc = np.zeros((self.n, self.n))
        for p in self.pieces:
            for k, a_k in enumerate(p.coeffs):
                e = k + power + 1
                acc += a_k * (p.hi**e - p.lo**e) / e
        return acc

    def partial_moment0(self, t: float) -> np.ndarray:
        """integral over [-h, -t] of F(theta) d theta for t in [0, h], exact."""
        if t <= 0.0:
            return self.moment(0)
        upper = -t
        acc = np.zeros((self.n, self.n))
        for p in self.pieces:
            hi = min(p.hi, upper)
            if hi <= p.lo:
                break
            for k, a_k in enumerate(p.coeffs):
                e = k + 1
                acc += a_k * (hi**e - p.lo**e) / e
        return acc

    def sup_norm(self, samples: int = 256) -> float:
        """Cheap estimate of sup over theta of the spectral norm of F."""
        thetas = np.linspace(-self.h, 0.0, samples)
        return max(np.linalg.norm(self.evaluate(t), 2) for t in thetas)


def _exp_poly_integral(s: complex, a: float, b: float, degree: int) -> list[complex]:
    """[I_0, ..., I_degree] with I_k = integral_a^b theta^k e^{s theta}."""
    if abs(s) < _SERIES_SWITCH:
        out = []
        for k in range(degree + 1):
            acc = 0.0 + 0.0j
            fact = 1.0
            for m in range(_SERIES_TERMS):
                e = k + m + 1
                acc += (s**m / fact) * (b**e - a**e) / e
                fact *= m + 1
            out.append(acc)
        return out
    eb, ea = np.exp(s * b), np.exp(s * a)
    out = [(eb - ea) / s]
    for k in range(1, degree + 1):
        out.append((b**k * eb - a**k * ea) / s - (k / s) * out[k - 1])
    return out


def char_matrix(kernel: KernelSpec, s: complex) -> np.ndarray:
    """Characteristic matrix H(s) = I - integral e^{s theta} F(theta) d theta."""
    acc = np.zeros((kernel.n, kernel.n), dtype=complex)
    for p in kernel.pieces:
        ints = _exp_poly_integral(complex(s), p.lo, p.hi, len(p.coeffs) - 1)
        for k, a_k in enumerate(p.coeffs):
            acc += a_k * ints[k]
    return np.eye(kernel.n, dtype=complex) - acc


def imaginary_axis_margin(
    kernel: KernelSpec, omega_max: float, samples: int
) -> tuple[float, float]:
    """Minimum of |det H(j omega)| over a sample grid on [0, omega_max].

    Returns (min modulus, argmin omega).  A real kernel has
    det H(-j w) = conj(det H(j w)), so omega >= 0 suffices.
    """
    if not omega_max > 0 or samples < 2:
        raise ValueError("need omega_max > 0 and samples >= 2")
    omegas = np.linspace(0.0, omega_max, samples)
    best, best_w = np.inf, 0.0
    for w in omegas:
        mod = abs(np.linalg.det(char_matrix(kernel, 1j * w)))
        if mod < best:
            best, best_w = mod, w
    return best, best_w


@dataclass(frozen=True)
class KernelConstants:
    """Constants derived from the kernel and the weight matrix W."""

    k0: np.ndarray       # (moment0 - I)^{-1}
    moment0: np.ndarray  # integral of F
    moment1: np.ndarray  # integral of theta * F
    s: np.ndarray        # K0 * moment1 * K0
    p: np.ndarray        # skew part of S^T W K0 - K0^T W S
    w: np.ndarray

    def __post_init__(self):
        for name in ("k0", "moment0", "moment1", "s", "p", "w"):
            getattr(self, name).setflags(write=False)

    @property
    def k0_w_k0(self) -> np.ndarray:
        """K0^T W K0, the slope of the symmetry relation."""
        return self.k0.T @ self.w @ self.k0


def derive_constants(kernel: KernelSpec, w: np.ndarray | None = None) -> KernelConstants:
    """Compute K0, moments, S and P; W defaults to the identity.

    Raises SingularAtZero when moment0 - I is numerically singular, i.e.
    s = 0 is an eigenvalue of the system.
    """
    n = kernel.n
    if w is None:
        w = np.eye(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n, n) or not np.allclose(w, w.T, atol=1e-12):
        raise ValueError("W must be a symmetric n x n matrix")
    if np.min(np.linalg.eigvalsh(w)) <= 0:
        raise ValueError("W must be positive definite")

    moment0 = kernel.moment(0)
    moment1 = kernel.moment(1)
    at_zero = moment0 - np.eye(n)
    if np.linalg.cond(at_zero) > _SINGULAR_COND:
        raise SingularAtZero(
            "integral of F minus the identity is numerically singular "
            "(the system has the eigenvalue s = 0)"
        )
    k0 = np.linalg.inv(at_zero)
    s = k0 @ moment1 @ k0
    p_raw = s.T @ w @ k0 - k0.T @ w @ s
    p = 0.5 * (p_raw - p_raw.T)
    return KernelConstants(k0=k0, moment0=moment0, moment1=moment1, s=s, p=p, w=w)


def constant_kernel(matrix: np.ndarray, h: float) -> KernelSpec:
    """Kernel F(theta) = B constant on [-h, 0]."""
    b = np.atleast_2d(np.asarray(matrix, dtype=float))
    return KernelSpec(
        n=b.shape[0], h=h, pieces=(Piece(lo=-h, hi=0.0, coeffs=b[None, :, :].copy()),)
    )


def affine_scalar_kernel(c1: float, c2: float, h: float = 1.0) -> KernelSpec:
    """Scalar kernel F(theta) = c2 - c1 * theta on [-h, 0]."""
    coeffs = np.array([[[c2]], [[-c1]]])
    return KernelSpec(n=1, h=h, pieces=(Piece(lo=-h, hi=0.0, coeffs=coeffs),))
