"""Pydantic request/response models for the HTTP service.

Matrices travel as row-major flat lists; grid functions as a (t0, t1,
step, samples) quadruple with samples nested [node][row][col].
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class PieceModel(BaseModel):
    interval: tuple[float, float]
    coeffs: list[list[float]]  # one row-major n*n list per power of theta


class KernelModel(BaseModel):
    n: int = Field(ge=1)
    h: float = Field(gt=0)
    pieces: list[PieceModel] = Field(min_length=1)

    def as_mapping(self) -> dict:
        return self.model_dump()


class GridPayload(BaseModel):
    t0: float
    t1: float
    step: float
    samples: list  # [node][row][col]


class PhiModel(BaseModel):
    kind: Literal["constant", "piecewise", "fundamental-shift"]
    value: Optional[list[float]] = None    # constant
    values: Optional[list[list[float]]] = None  # piecewise sub-interval rows
    tau: Optional[float] = None            # fundamental-shift


class FundamentalRequest(BaseModel):
    kernel: KernelModel
    horizon: float = Field(gt=0)
    delta: float = Field(gt=0)
    derivative: bool = False
    residuals: bool = False


class ResidualsPayload(BaseModel):
    left_form: float
    right_form: float
    jump_identity: float


class FundamentalResponse(BaseModel):
    k0: list[list[float]]
    grid: GridPayload
    derivative: Optional[GridPayload] = None
    residuals: Optional[ResidualsPayload] = None


class SimulateRequest(BaseModel):
    kernel: KernelModel
    phi: PhiModel
    horizon: float = Field(gt=0)
    delta: float = Field(gt=0)


class SimulateResponse(BaseModel):
    grid: GridPayload


class LyapunovRequest(BaseModel):
    kernel: KernelModel
    weight: Optional[list[float]] = None  # row-major n*n
    method: Literal["collocation", "direct"] = "collocation"
    n_colloc: int = Field(default=100, ge=20)
    delta: float = Field(default=1e-3, gt=0)   # K step (direct + residuals)
    horizon: Optional[float] = None            # direct truncation, default 20 h
    residuals: bool = False


class LyapunovResidualsPayload(BaseModel):
    dynamic: float
    symmetry_at_zero: float
    alg_left: float
    alg_right: float
    derivative: float
    cross_fundamental: float


class LyapunovResponse(BaseModel):
    grid: GridPayload  # U on [0, 2h]
    method: str
    diagnostics: dict
    residuals: Optional[LyapunovResidualsPayload] = None


class TestRequest(BaseModel):
    kernel: KernelModel
    weight: Optional[list[float]] = None
    n_colloc: int = Field(default=100, ge=20)
    r_values: list[int] = Field(default=[2, 3, 4, 5, 6], min_length=1)
    tolerance_scale: float = Field(default=1e-7, gt=0)
    witness: bool = False
    delta: float = Field(default=1e-3, gt=0)  # K step for the witness


class RRecordPayload(BaseModel):
    r: int
    min_eigenvalue: float
    asymmetry_defect: float
    tolerance: float


class WitnessPayload(BaseModel):
    r: int
    gamma: list[float]
    taus: list[float]
    quadratic_value: float
    quadrature_value: float
    relative_gap: float


class TestResponse(BaseModel):
    outcome: str
    r: Optional[int] = None
    reason: Optional[str] = None
    records: list[RRecordPayload]
    witness: Optional[WitnessPayload] = None


class InjectionModel(BaseModel):
    piece: int = 0
    power: int = 0
    row: int = 0
    col: int = 0
    scale: float = 1.0
    offset: float = 0.0


class SlotModel(BaseModel):
    name: str
    range: tuple[float, float]
    points: int = Field(ge=2)
    targets: list[InjectionModel] = Field(min_length=1)


class FamilyModel(BaseModel):
    p1: SlotModel
    p2: SlotModel


class NumericsModel(BaseModel):
    n_colloc: int = Field(default=40, ge=20)
    delta: float = Field(default=2e-3, gt=0)
    horizon: Optional[float] = None
    trials: int = Field(default=2, ge=1)
    growth_band: float = Field(default=0.05, gt=0)
    seed: int = 0
    tolerance_scale: float = Field(default=1e-7, gt=0)
    imag_margin_tol: float = Field(default=1e-6, ge=0)
    omega_samples: int = Field(default=400, ge=2)
    omega_max: Optional[float] = None


class ScanRequest(BaseModel):
    kernel: KernelModel
    family: FamilyModel
    r_values: list[int] = Field(default=[2, 3, 4, 5], min_length=1)
    numerics: NumericsModel = NumericsModel()
    oracle: bool = False
    workers: int = Field(default=1, ge=1, le=64)


class PointPayload(BaseModel):
    index: int
    p1: float
    p2: float
    verdict: str
    verdict_r: Optional[int] = None
    min_eigenvalues: dict[int, float]
    tolerance: float
    imag_margin: Optional[float] = None
    oracle: Optional[str] = None
    reason: Optional[str] = None
    elapsed: float


class ScanResponse(BaseModel):
    records: list[PointPayload]
    r_schedule: list[int]
    p1_name: str
    p2_name: str
    p1_values: list[float]
    p2_values: list[float]
    with_oracle: bool
    elapsed: float


class BoundaryRequest(BaseModel):
    kernel: KernelModel
    family: FamilyModel
    omega_max: float = Field(gt=0)
    omega_samples: int = Field(default=200, ge=2)


class CurvePayload(BaseModel):
    kind: str
    points: list[tuple[float, float, float]]  # (p1, p2, omega)
    failures: int = 0


class BoundaryResponse(BaseModel):
    curves: list[CurvePayload]


class ErrorPayload(BaseModel):
    error: str
    detail: str
