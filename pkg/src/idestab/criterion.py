"""Finite positive-definiteness stability test.

The block L(tau1, tau2) = U(0) - U(-tau1) - U(tau2) + U(tau2 - tau1)
assembled at the equidistant points tau_i = i h / r gives the nr x nr
matrix whose positive definiteness for every r >= 2 characterizes
exponential stability.  A certified negative eigenvalue yields an
instability witness: the eigenvector's special function makes the
functional v1 negative, which the quadrature path corroborates
independently.

A "consistent with stability" outcome at the largest tested r is NOT a
stability proof; the theory guarantees only that some finite r exposes
every unstable system, without a bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional import build_special, v1_special
from .grids import GridFunction
from .kernel import KernelSpec
from .lyapunov import LyapunovTable

#: dead-band scale relative to the Frobenius norm of the tested matrix
DEFAULT_TOLERANCE_SCALE = 1e-7

CONSISTENT = "consistent-with-stability"
UNSTABLE = "certified-unstable"
INCONCLUSIVE = "inconclusive"


def l_matrix(table: LyapunovTable, tau1: float, tau2: float) -> np.ndarray:
    """L(tau1, tau2) for tau in (0, h]."""
    h = table.h
    if not (0.0 < tau1 <= h + 1e-12 and 0.0 < tau2 <= h + 1e-12):
        raise ValueError("tau points must lie in (0, h]")
    return table.u(0.0) - table.u(-tau1) - table.u(tau2) + table.u(tau2 - tau1)


@dataclass(frozen=True)
class KrMatrix:
    """Symmetrized block matrix [L(tau_i, tau_j)] at tau_i = i h / r."""

    r: int
    matrix: np.ndarray
    asymmetry_defect: float

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def kr_matrix(table: LyapunovTable, r: int) -> KrMatrix:
    """Assemble the r x r block matrix at the equidistant tau grid."""
    if r < 2:
        raise ValueError("the block test needs r >= 2")
    n = table.kernel.n
    h = table.h
    raw = np.empty((n * r, n * r))
    for i in range(r):
        for j in range(r):
            raw[i * n : (i + 1) * n, j * n : (j + 1) * n] = l_matrix(
                table, (i + 1) * h / r, (j + 1) * h / r
            )
    defect = float(np.linalg.norm(raw - raw.T))
    return KrMatrix(r=r, matrix=0.5 * (raw + raw.T), asymmetry_defect=defect)


@dataclass(frozen=True)
class RRecord:
    """One positive-definiteness check at a given r."""

    r: int
    min_eigenvalue: float
    asymmetry_defect: float
    tolerance: float


@dataclass(frozen=True)
class StabilityVerdict:
    """Tri-state outcome with the per-r evidence.

    certified-unstable carries the offending r and the eigenvector gamma;
    consistent-with-stability names the largest tested r and means all
    tested block matrices were positive definite, nothing more.
    """

    outcome: str
    records: tuple[RRecord, ...]
    r: int | None = None
    witness: np.ndarray | None = None
    reason: str | None = None


def stability_test(
    table: LyapunovTable,
    r_schedule,
    tolerance_scale: float = DEFAULT_TOLERANCE_SCALE,
) -> StabilityVerdict:
    """Run the block test over an ascending r schedule with early exit.

    Eigenvalues inside the dead band (+-tolerance_scale * ||K_r||_F) make
    the point inconclusive unless a later r certifies instability.
    """
    schedule = list(r_schedule)
    if not schedule or any(
        r2 <= r1 for r1, r2 in zip(schedule, schedule[1:])
    ) or schedule[0] < 2:
        raise ValueError("r schedule must be ascending with minimum >= 2")

    records: list[RRecord] = []
    dead_band_r: int | None = None
    for r in schedule:
        block = kr_matrix(table, r)
        tol = tolerance_scale * float(np.linalg.norm(block.matrix, "fro"))
        try:
            eigvals, eigvecs = np.linalg.eigh(block.matrix)
        except np.linalg.LinAlgError:
            return StabilityVerdict(
                outcome=INCONCLUSIVE,
                records=tuple(records),
                reason=f"eigensolver failure at r={r}",
            )
        lam = float(eigvals[0])
        records.append(
            RRecord(
                r=r,
                min_eigenvalue=lam,
                asymmetry_defect=block.asymmetry_defect,
                tolerance=tol,
            )
        )
        if lam < -tol:
            return StabilityVerdict(
                outcome=UNSTABLE,
                records=tuple(records),
                r=r,
                witness=eigvecs[:, 0].copy(),
            )
        if lam <= tol and dead_band_r is None:
            dead_band_r = r
    if dead_band_r is not None:
        return StabilityVerdict(
            outcome=INCONCLUSIVE,
            records=tuple(records),
            reason=f"minimum eigenvalue inside the dead band at r={dead_band_r}",
        )
    return StabilityVerdict(
        outcome=CONSISTENT, records=tuple(records), r=schedule[-1]
    )


@dataclass(frozen=True)
class WitnessReport:
    """Instability certificate evaluated two independent ways."""

    r: int
    gamma: np.ndarray
    quadratic_value: float   # gamma^T K_r gamma
    quadrature_value: float  # v1(psi) by functional quadrature
    relative_gap: float


def instability_witness(
    table: LyapunovTable,
    kernel: KernelSpec,
    k: GridFunction,
    verdict: StabilityVerdict,
) -> WitnessReport:
    """Build the special function from the certifying eigenvector and
    evaluate v1 on it by quadrature; a negative value corroborates the
    negative quadratic form independently."""
    if verdict.outcome != UNSTABLE or verdict.witness is None or verdict.r is None:
        raise ValueError("verdict does not certify instability")
    r = verdict.r
    gamma = verdict.witness
    n = kernel.n
    block = kr_matrix(table, r)
    quad_form = float(gamma @ block.matrix @ gamma)
    taus = [(i + 1) * kernel.h / r for i in range(r)]
    gammas = [gamma[i * n : (i + 1) * n] for i in range(r)]
    psi = build_special(k, kernel, taus, gammas)
    v1 = v1_special(table, kernel, psi)
    gap = abs(v1 - quad_form) / max(1e-300, abs(quad_form))
    return WitnessReport(
        r=r,
        gamma=gamma,
        quadratic_value=quad_form,
        quadrature_value=v1,
        relative_gap=gap,
    )
