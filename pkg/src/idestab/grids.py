"""Matrix-valued functions sampled on uniform time grids.

A GridFunction stores samples of an (n x m) matrix function at the nodes
t0, t0+step, ..., t1 and evaluates between nodes by piecewise-linear
interpolation.  Evaluation outside [t0, t1] is an error unless the
function carries an explicit constant left extension (used for the
fundamental matrix, which equals K0 for t < 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, OutOfRange

#: relative slack used when checking that a length is an integer number of steps
_DIV_TOL = 1e-9


def num_steps(length: float, step: float) -> int:
    """Number of steps covering `length`, requiring an integer fit."""
    m = int(round(length / step))
    if m < 1 or abs(m * step - length) > _DIV_TOL * max(1.0, abs(length)):
        raise GridMismatch(
            f"step {step} does not divide interval length {length}"
        )
    return m


def trapezoid_weights(count: int, step: float) -> np.ndarray:
    """Composite trapezoid weights for `count` equispaced nodes."""
    if count < 1:
        raise ValueError("trapezoid rule needs at least one node")
    if count == 1:
        return np.zeros(1)
    w = np.full(count, step)
    w[0] = w[-1] = 0.5 * step
    return w


@dataclass(frozen=True)
class GridFunction:
    """Samples of a matrix-valued function on a uniform grid.

    samples[i] is the value at t0 + i*step; shape (nodes, n, m).
    `left_extension`, when given, is the constant value returned for
    t < t0 (the grid still errors above t1).
    """

    t0: float
    t1: float
    step: float
    samples: np.ndarray
    left_extension: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.samples.ndim != 3:
            raise ValueError("samples must have shape (nodes, n, m)")
        m = num_steps(self.t1 - self.t0, self.step)
        if self.samples.shape[0] != m + 1:
            raise GridMismatch(
                f"expected {m + 1} samples on [{self.t0}, {self.t1}] "
                f"at step {self.step}, got {self.samples.shape[0]}"
            )
        if self.left_extension is not None and (
            self.left_extension.shape != self.samples.shape[1:]
        ):
            raise ValueError("left_extension shape mismatch")
        self.samples.setflags(write=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.samples.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[1:]

    def __call__(self, t) -> np.ndarray:
        """Evaluate at scalar or array `t` (linear interpolation)."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        out = np.empty(t_arr.shape + self.shape)

        eps = _DIV_TOL * max(1.0, abs(self.t1 - self.t0))
        below = t_arr < self.t0 - eps
        above = t_arr > self.t1 + eps
        if np.any(above) or (np.any(below) and self.left_extension is None):
            bad = t_arr[above][0] if np.any(above) else t_arr[below][0]
            raise OutOfRange(
                f"t={bad} outside grid [{self.t0}, {self.t1}]"
            )

        pos = (np.clip(t_arr, self.t0, self.t1) - self.t0) / self.step
        idx = np.minimum(pos.astype(int), self.samples.shape[0] - 2)
        frac = pos - idx
        out[:] = (
            (1.0 - frac)[..., None, None] * self.samples[idx]
            + frac[..., None, None] * self.samples[idx + 1]
        )
        if np.any(below):
            out[below] = self.left_extension
        return out[0] if scalar else out

    def node_index(self, t: float) -> int:
        """Index of the node at `t`; errors if `t` is not a node."""
        pos = (t - self.t0) / self.step
        i = int(round(pos))
        if abs(pos - i) > 1e-6 or i < 0 or i >= self.samples.shape[0]:
            raise GridMismatch(f"t={t} is not a node of the grid")
        return i

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            abs(self.t0 - other.t0) < _DIV_TOL
            and abs(self.t1 - other.t1) < _DIV_TOL
            and abs(self.step - other.step) < _DIV_TOL * self.step
        )
