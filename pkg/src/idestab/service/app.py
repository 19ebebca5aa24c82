"""FastAPI service wrapping the stability toolbox.

Domain errors (singular system, non-decaying tail, ill-conditioned
collocation, ...) map to HTTP 400 with the exception name, so a thin
client can distinguish computation failures (exit 1) from malformed
requests (pydantic's 422, exit 2).
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import family_from_mapping, kernel_from_mapping, weight_from_mapping
from ..criterion import UNSTABLE, instability_witness, stability_test
from ..errors import ConfigError, IdestabError
from ..fundamental import (
    fundamental_derivative,
    fundamental_matrix,
    identity_residuals,
)
from ..grids import GridFunction
from ..kernel import KernelSpec, derive_constants
from ..lyapunov import (
    lyapunov_collocate,
    lyapunov_direct,
    property_residuals,
)
from ..scan import ScanNumerics, dsubdivision_boundary, scan_region
from ..simulator import (
    constant_phi,
    fundamental_shift_phi,
    piecewise_constant_phi,
    solve_ide,
)
from . import models

app = FastAPI(
    title="idestab",
    version=__version__,
    description=(
        "Exponential-stability analysis of linear integral delay equations: "
        "fundamental matrix, delay Lyapunov matrix, finite block "
        "positive-definiteness test, and parameter-plane stability charts."
    ),
)


@app.exception_handler(IdestabError)
async def _domain_error(request: Request, exc: IdestabError) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"error": type(exc).__name__, "detail": str(exc)},
    )


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
    # malformed experiment content, as opposed to a failed computation
    return JSONResponse(
        status_code=422,
        content={"error": "ConfigError", "detail": str(exc)},
    )


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={"error": "ValueError", "detail": str(exc)},
    )


def _grid_payload(g: GridFunction) -> models.GridPayload:
    return models.GridPayload(
        t0=g.t0, t1=g.t1, step=g.step, samples=g.samples.tolist()
    )


def _kernel(req_kernel: models.KernelModel) -> KernelSpec:
    return kernel_from_mapping(req_kernel.as_mapping())


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/fundamental", response_model=models.FundamentalResponse)
def fundamental(req: models.FundamentalRequest) -> models.FundamentalResponse:
    kernel = _kernel(req.kernel)
    constants = derive_constants(kernel)
    k = fundamental_matrix(kernel, constants, req.horizon, req.delta)
    out = models.FundamentalResponse(
        k0=constants.k0.tolist(), grid=_grid_payload(k)
    )
    if req.derivative:
        out.derivative = _grid_payload(fundamental_derivative(kernel, k))
    if req.residuals:
        res = identity_residuals(kernel, k)
        out.residuals = models.ResidualsPayload(
            left_form=res.left_form,
            right_form=res.right_form,
            jump_identity=res.jump_identity,
        )
    return out


def _build_phi(kernel: KernelSpec, phi: models.PhiModel, delta: float) -> GridFunction:
    if phi.kind == "constant":
        if phi.value is None:
            raise ValueError("phi.value is required for kind=constant")
        return constant_phi(kernel, np.asarray(phi.value, dtype=float), delta)
    if phi.kind == "piecewise":
        if not phi.values:
            raise ValueError("phi.values is required for kind=piecewise")
        return piecewise_constant_phi(
            kernel, np.asarray(phi.values, dtype=float), delta
        )
    if phi.tau is None:
        raise ValueError("phi.tau is required for kind=fundamental-shift")
    constants = derive_constants(kernel)
    k = fundamental_matrix(
        kernel, constants, max(kernel.h, phi.tau), delta
    )
    return fundamental_shift_phi(k, kernel, phi.tau, delta)


@app.post("/simulate", response_model=models.SimulateResponse)
def simulate(req: models.SimulateRequest) -> models.SimulateResponse:
    kernel = _kernel(req.kernel)
    phi = _build_phi(kernel, req.phi, req.delta)
    x = solve_ide(kernel, phi, req.horizon, req.delta)
    return models.SimulateResponse(grid=_grid_payload(x))


@app.post("/lyapunov", response_model=models.LyapunovResponse)
def lyapunov(req: models.LyapunovRequest) -> models.LyapunovResponse:
    kernel = _kernel(req.kernel)
    w = weight_from_mapping(req.weight, kernel.n)
    constants = derive_constants(kernel, w)
    k = None
    if req.method == "direct" or req.residuals:
        horizon = req.horizon or 20.0 * kernel.h
        k = fundamental_matrix(
            kernel, constants, horizon + 2.0 * kernel.h, req.delta
        )
    if req.method == "direct":
        table = lyapunov_direct(kernel, constants, k, req.n_colloc)
    else:
        table = lyapunov_collocate(kernel, constants, req.n_colloc)
    diagnostics = {
        key: (None if isinstance(val, float) and math.isinf(val) else val)
        for key, val in table.diagnostics.items()
    }
    out = models.LyapunovResponse(
        grid=_grid_payload(table.grid),
        method=table.method,
        diagnostics=diagnostics,
    )
    if req.residuals:
        res = property_residuals(table, kernel, k)
        out.residuals = models.LyapunovResidualsPayload(
            dynamic=res.dynamic,
            symmetry_at_zero=res.symmetry_at_zero,
            alg_left=res.alg_left,
            alg_right=res.alg_right,
            derivative=res.derivative,
            cross_fundamental=res.cross_fundamental,
        )
    return out


@app.post("/test", response_model=models.TestResponse)
def test_stability(req: models.TestRequest) -> models.TestResponse:
    kernel = _kernel(req.kernel)
    w = weight_from_mapping(req.weight, kernel.n)
    constants = derive_constants(kernel, w)
    table = lyapunov_collocate(kernel, constants, req.n_colloc)
    verdict = stability_test(
        table, req.r_values, tolerance_scale=req.tolerance_scale
    )
    out = models.TestResponse(
        outcome=verdict.outcome,
        r=verdict.r,
        reason=verdict.reason,
        records=[
            models.RRecordPayload(
                r=rec.r,
                min_eigenvalue=rec.min_eigenvalue,
                asymmetry_defect=rec.asymmetry_defect,
                tolerance=rec.tolerance,
            )
            for rec in verdict.records
        ],
    )
    if req.witness and verdict.outcome == UNSTABLE:
        k = fundamental_matrix(kernel, constants, kernel.h, req.delta)
        report = instability_witness(table, kernel, k, verdict)
        out.witness = models.WitnessPayload(
            r=report.r,
            gamma=report.gamma.tolist(),
            taus=[(i + 1) * kernel.h / report.r for i in range(report.r)],
            quadratic_value=report.quadratic_value,
            quadrature_value=report.quadrature_value,
            relative_gap=report.relative_gap,
        )
    return out


@app.post("/scan", response_model=models.ScanResponse)
def scan(req: models.ScanRequest) -> models.ScanResponse:
    base = _kernel(req.kernel)
    family = family_from_mapping(base, req.family.model_dump())
    numerics = ScanNumerics(**req.numerics.model_dump())
    result = scan_region(
        family,
        req.r_values,
        numerics,
        with_oracle=req.oracle,
        workers=req.workers,
    )
    return models.ScanResponse(
        records=[
            models.PointPayload(
                index=rec.index,
                p1=rec.p1,
                p2=rec.p2,
                verdict=rec.verdict,
                verdict_r=rec.verdict_r,
                min_eigenvalues=rec.min_eigenvalues,
                tolerance=rec.tolerance,
                imag_margin=None if math.isnan(rec.imag_margin) else rec.imag_margin,
                oracle=rec.oracle,
                reason=rec.reason,
                elapsed=rec.elapsed,
            )
            for rec in result.records
        ],
        r_schedule=list(result.r_schedule),
        p1_name=result.p1_name,
        p2_name=result.p2_name,
        p1_values=result.p1_values.tolist(),
        p2_values=result.p2_values.tolist(),
        with_oracle=result.with_oracle,
        elapsed=result.elapsed,
    )


@app.post("/boundary", response_model=models.BoundaryResponse)
def boundary(req: models.BoundaryRequest) -> models.BoundaryResponse:
    base = _kernel(req.kernel)
    family = family_from_mapping(base, req.family.model_dump())
    curves = dsubdivision_boundary(family, req.omega_max, req.omega_samples)
    return models.BoundaryResponse(
        curves=[
            models.CurvePayload(
                kind=c.kind,
                points=[tuple(map(float, p)) for p in c.points],
                failures=c.failures,
            )
            for c in curves
        ]
    )
