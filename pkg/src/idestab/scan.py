"""Two-parameter stability charts.

A ParameterFamily injects two parameters affinely into coefficient
entries of a base kernel.  scan_region runs the criterion pipeline at
every grid point (constants, imaginary-axis screen, collocation Lyapunov
table, block test with early exclusion) and optionally labels points with
the simulation oracle.  dsubdivision_boundary traces the curves where
det H(j omega) = 0 in the parameter plane, plus the s = 0 locus.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import criterion
from .errors import IdestabError, SingularAtZero
from .kernel import KernelSpec, Piece, char_matrix, derive_constants, imaginary_axis_margin
from .lyapunov import lyapunov_collocate
from .simulator import stability_oracle


@dataclass(frozen=True)
class Injection:
    """Coefficient entry receiving offset + scale * parameter."""

    piece: int
    power: int
    row: int
    col: int
    scale: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class ParameterSlot:
    name: str
    lo: float
    hi: float
    points: int
    targets: tuple[Injection, ...]

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("parameter resolution must be >= 2")
        if not np.isfinite(self.lo) or not np.isfinite(self.hi):
            raise ValueError("parameter range must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class ParameterFamily:
    """Base kernel template with two affine parameter slots."""

    base: KernelSpec
    p1: ParameterSlot
    p2: ParameterSlot

    def __post_init__(self):
        for slot in (self.p1, self.p2):
            for t in slot.targets:
                if t.piece >= len(self.base.pieces):
                    raise ValueError(f"injection targets missing piece {t.piece}")
                coeffs = self.base.pieces[t.piece].coeffs
                if t.power >= coeffs.shape[0]:
                    raise ValueError(
                        f"injection targets missing power {t.power} of piece {t.piece}"
                    )
                if not (0 <= t.row < self.base.n and 0 <= t.col < self.base.n):
                    raise ValueError("injection entry indices out of range")

    def instantiate(self, v1: float, v2: float) -> KernelSpec:
        pieces = [p.coeffs.copy() for p in self.base.pieces]
        for slot, value in ((self.p1, v1), (self.p2, v2)):
            for t in slot.targets:
                pieces[t.piece][t.power, t.row, t.col] = t.offset + t.scale * value
        return KernelSpec(
            n=self.base.n,
            h=self.base.h,
            pieces=tuple(
                Piece(lo=p.lo, hi=p.hi, coeffs=c)
                for p, c in zip(self.base.pieces, pieces)
            ),
        )


@dataclass(frozen=True)
class ScanNumerics:
    """Numerical knobs shared by every grid point of a sweep."""

    n_colloc: int = 40
    delta: float = 2e-3        # step for oracle trajectories
    horizon: float | None = None  # oracle horizon, default 20 h
    trials: int = 2
    growth_band: float = 0.05
    seed: int = 0
    tolerance_scale: float = criterion.DEFAULT_TOLERANCE_SCALE
    imag_margin_tol: float = 1e-6
    omega_samples: int = 400
    omega_max: float | None = None


@dataclass(frozen=True)
class PointRecord:
    """Outcome of the pipeline at one grid point."""

    index: int
    p1: float
    p2: float
    verdict: str
    verdict_r: int | None
    min_eigenvalues: dict
    tolerance: float
    imag_margin: float
    oracle: str | None
    reason: str | None
    elapsed: float


@dataclass(frozen=True)
class ScanResult:
    records: tuple[PointRecord, ...]
    r_schedule: tuple[int, ...]
    p1_name: str
    p2_name: str
    p1_values: np.ndarray
    p2_values: np.ndarray
    numerics: ScanNumerics
    with_oracle: bool
    elapsed: float = 0.0


def _point_pipeline(
    family: ParameterFamily,
    numerics: ScanNumerics,
    r_schedule: tuple[int, ...],
    with_oracle: bool,
    index: int,
    v1: float,
    v2: float,
) -> PointRecord:
    start = time.perf_counter()
    kernel = family.instantiate(v1, v2)
    omega_max = numerics.omega_max or max(
        8.0 * np.pi / kernel.h, 2.0 * kernel.sup_norm()
    )
    horizon = numerics.horizon or 20.0 * kernel.h

    oracle_label = None
    if with_oracle:
        overdict = stability_oracle(
            kernel,
            trials=numerics.trials,
            horizon=horizon,
            step=numerics.delta,
            growth_band=numerics.growth_band,
            seed=numerics.seed * 1_000_003 + index,
            omega_max=omega_max,
        )
        oracle_label = overdict.label

    min_eigs: dict = {}
    margin = float("nan")
    try:
        constants = derive_constants(kernel)
        margin, _ = imaginary_axis_margin(kernel, omega_max, numerics.omega_samples)
        if margin < numerics.imag_margin_tol:
            return PointRecord(
                index, v1, v2, criterion.INCONCLUSIVE, None, min_eigs, 0.0,
                margin, oracle_label, "imaginary-axis margin below tolerance",
                time.perf_counter() - start,
            )
        table = lyapunov_collocate(kernel, constants, numerics.n_colloc)
        verdict = criterion.stability_test(
            table, r_schedule, tolerance_scale=numerics.tolerance_scale
        )
        min_eigs = {rec.r: rec.min_eigenvalue for rec in verdict.records}
        tol = verdict.records[-1].tolerance if verdict.records else 0.0
        return PointRecord(
            index, v1, v2, verdict.outcome, verdict.r, min_eigs, tol,
            margin, oracle_label, verdict.reason, time.perf_counter() - start,
        )
    except SingularAtZero:
        return PointRecord(
            index, v1, v2, criterion.INCONCLUSIVE, None, min_eigs, 0.0,
            margin, oracle_label, "singular-at-zero",
            time.perf_counter() - start,
        )
    except IdestabError as exc:
        return PointRecord(
            index, v1, v2, criterion.INCONCLUSIVE, None, min_eigs, 0.0,
            margin, oracle_label, f"{type(exc).__name__}: {exc}",
            time.perf_counter() - start,
        )


def _point_worker(args) -> PointRecord:
    return _point_pipeline(*args)


def scan_region(
    family: ParameterFamily,
    r_schedule,
    numerics: ScanNumerics,
    with_oracle: bool = False,
    workers: int = 1,
) -> ScanResult:
    """Run the pipeline at every grid point; failures never abort the sweep.

    Grid points are independent work items; records are ordered by grid
    index (row-major in p1 then p2) regardless of completion order, so the
    output is deterministic for a fixed configuration and seed.
    """
    schedule = tuple(int(r) for r in r_schedule)
    v1s = family.p1.values
    v2s = family.p2.values
    jobs = []
    index = 0
    for a in v1s:
        for b in v2s:
            jobs.append(
                (family, numerics, schedule, with_oracle, index, float(a), float(b))
            )
            index += 1
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_point_worker, jobs, chunksize=8))
    else:
        records = [_point_pipeline(*job) for job in jobs]
    records.sort(key=lambda rec: rec.index)
    return ScanResult(
        records=tuple(records),
        r_schedule=schedule,
        p1_name=family.p1.name,
        p2_name=family.p2.name,
        p1_values=v1s,
        p2_values=v2s,
        numerics=numerics,
        with_oracle=with_oracle,
        elapsed=time.perf_counter() - start,
    )


# -- D-subdivision boundaries ----------------------------------------------------


@dataclass(frozen=True)
class BoundaryCurve:
    """Polyline in the parameter plane; points are (p1, p2, omega)."""

    kind: str  # "imaginary-axis" | "zero-root"
    points: np.ndarray
    failures: int = 0


def _det_h(family: ParameterFamily, s: complex, v1: float, v2: float) -> complex:
    return complex(np.linalg.det(char_matrix(family.instantiate(v1, v2), s)))


def _affine_coefficients(family, s):
    """det H(s; p) = c0 + c1 p1 + c2 p2 when the determinant is affine."""
    c0 = _det_h(family, s, 0.0, 0.0)
    c1 = _det_h(family, s, 1.0, 0.0) - c0
    c2 = _det_h(family, s, 0.0, 1.0) - c0
    # affinity check at a probe point
    probe = _det_h(family, s, 1.0, 1.0)
    affine = abs(probe - (c0 + c1 + c2)) <= 1e-9 * max(1.0, abs(probe))
    return affine, c0, c1, c2


def _in_range(family: ParameterFamily, v1: float, v2: float, pad: float = 0.0) -> bool:
    s1 = (family.p1.hi - family.p1.lo) * pad
    s2 = (family.p2.hi - family.p2.lo) * pad
    return (
        family.p1.lo - s1 <= v1 <= family.p1.hi + s1
        and family.p2.lo - s2 <= v2 <= family.p2.hi + s2
    )


def _newton_roots(family, omega, seeds, tol=1e-10, iters=40):
    """Newton with numerical Jacobian on [Re det, Im det] = 0."""
    roots = []
    failures = 0
    scale1 = max(1.0, abs(family.p1.hi - family.p1.lo))
    scale2 = max(1.0, abs(family.p2.hi - family.p2.lo))
    for seed in seeds:
        p = np.array(seed, dtype=float)
        ok = False
        for _ in range(iters):
            val = _det_h(family, 1j * omega, p[0], p[1])
            g = np.array([val.real, val.imag])
            if np.linalg.norm(g) < tol:
                ok = True
                break
            d1 = 1e-6 * scale1
            d2 = 1e-6 * scale2
            gp1 = _det_h(family, 1j * omega, p[0] + d1, p[1])
            gm1 = _det_h(family, 1j * omega, p[0] - d1, p[1])
            gp2 = _det_h(family, 1j * omega, p[0], p[1] + d2)
            gm2 = _det_h(family, 1j * omega, p[0], p[1] - d2)
            jac = np.array(
                [
                    [(gp1.real - gm1.real) / (2 * d1), (gp2.real - gm2.real) / (2 * d2)],
                    [(gp1.imag - gm1.imag) / (2 * d1), (gp2.imag - gm2.imag) / (2 * d2)],
                ]
            )
            try:
                step = np.linalg.solve(jac, g)
            except np.linalg.LinAlgError:
                break
            p = p - step
            if not _in_range(family, p[0], p[1], pad=1.0):
                break
        if ok and _in_range(family, p[0], p[1], pad=0.02):
            if all(
                abs(p[0] - q[0]) > 1e-6 * scale1 or abs(p[1] - q[1]) > 1e-6 * scale2
                for q in roots
            ):
                roots.append((float(p[0]), float(p[1])))
        elif not ok:
            failures += 1
    return roots, failures


def dsubdivision_boundary(
    family: ParameterFamily,
    omega_max: float,
    omega_samples: int,
) -> list[BoundaryCurve]:
    """Curves in the parameter plane where some root sits on j omega.

    For each omega the two real equations Re det H = Im det H = 0 are
    solved directly when the determinant is affine in the parameters and
    by Newton from grid-cell corners otherwise.  The s = 0 locus
    det H(0; p) = 0 is always included.
    """
    if omega_max <= 0 or omega_samples < 2:
        raise ValueError("need omega_max > 0 and omega_samples >= 2")
    curves: list[BoundaryCurve] = []

    # the zero-root locus: one real equation, traced on a fine grid
    zero_pts = _zero_root_locus(family)
    if zero_pts.size:
        curves.append(BoundaryCurve(kind="zero-root", points=zero_pts))

    omegas = np.linspace(0.0, omega_max, omega_samples + 1)[1:]
    chains: list[list[tuple[float, float, float]]] = []
    failures = 0
    corner_seeds = [
        (a, b)
        for a in np.linspace(family.p1.lo, family.p1.hi, 5)
        for b in np.linspace(family.p2.lo, family.p2.hi, 5)
    ]
    for omega in omegas:
        affine, c0, c1, c2 = _affine_coefficients(family, 1j * omega)
        if affine:
            mat = np.array([[c1.real, c2.real], [c1.imag, c2.imag]])
            rhs = -np.array([c0.real, c0.imag])
            if abs(np.linalg.det(mat)) < 1e-14:
                continue
            sol = np.linalg.solve(mat, rhs)
            pts = [(float(sol[0]), float(sol[1]))] if _in_range(
                family, sol[0], sol[1], pad=0.02
            ) else []
        else:
            pts, fail = _newton_roots(family, omega, corner_seeds)
            failures += fail
        for p in pts:
            placed = False
            scale = max(
                family.p1.hi - family.p1.lo, family.p2.hi - family.p2.lo
            )
            for chain in chains:
                last = chain[-1]
                if (
                    abs(last[2] - omega) <= 2.1 * (omegas[1] - omegas[0])
                    and np.hypot(last[0] - p[0], last[1] - p[1]) < 0.1 * scale
                ):
                    chain.append((p[0], p[1], float(omega)))
                    placed = True
                    break
            if not placed:
                chains.append([(p[0], p[1], float(omega))])
    for chain in chains:
        curves.append(
            BoundaryCurve(
                kind="imaginary-axis",
                points=np.array(chain, dtype=float),
                failures=failures,
            )
        )
    return curves


def _zero_root_locus(family: ParameterFamily, resolution: int = 201) -> np.ndarray:
    """Points of det H(0; p) = 0 extracted from grid-cell edge crossings."""
    v1s = np.linspace(family.p1.lo, family.p1.hi, resolution)
    v2s = np.linspace(family.p2.lo, family.p2.hi, resolution)
    vals = np.empty((resolution, resolution))
    for i, a in enumerate(v1s):
        for j, b in enumerate(v2s):
            vals[i, j] = np.real(_det_h(family, 0.0, a, b))
    pts: list[tuple[float, float, float]] = []
    for i in range(resolution):
        for j in range(resolution - 1):
            f0, f1 = vals[i, j], vals[i, j + 1]
            if f0 == 0.0:
                pts.append((v1s[i], v2s[j], 0.0))
            elif f0 * f1 < 0.0:
                t = f0 / (f0 - f1)
                pts.append((v1s[i], v2s[j] + t * (v2s[j + 1] - v2s[j]), 0.0))
    for j in range(resolution):
        for i in range(resolution - 1):
            f0, f1 = vals[i, j], vals[i + 1, j]
            if f0 * f1 < 0.0:
                t = f0 / (f0 - f1)
                pts.append((v1s[i] + t * (v1s[i + 1] - v1s[i]), v2s[j], 0.0))
    return np.array(sorted(set(pts)), dtype=float) if pts else np.empty((0, 3))
