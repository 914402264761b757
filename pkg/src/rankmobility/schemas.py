"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class IncomeRow(BaseModel):
    parent_income: float
    child_income: float
    group: Optional[str] = None


class GridSpec(BaseModel):
    """Evenly spaced grid on integer multiples of step."""

    start: float = Field(gt=0.0, lt=1.0)
    stop: float = Field(gt=0.0, lt=1.0)
    step: float = Field(default=0.01, gt=0.0)


class EstimateRequest(BaseModel):
    data: list[IncomeRow] = Field(min_length=1)
    estimator: Literal["ebc", "beta", "dr"] = "beta"
    m: Optional[Union[int, Literal["sqrt-n"]]] = None
    link: Literal["logit", "probit"] = "logit"
    design: Literal["linear", "quadratic"] = "linear"
    tau: float = 0.0
    grid: Optional[GridSpec] = None


class CurvePoint(BaseModel):
    s: float
    value: float
    flag: str = ""


class EstimateResponse(BaseModel):
    points: list[CurvePoint]
    estimator: str
    tau: float
    n: int
    warnings: list[str] = []


class BandsRequest(BaseModel):
    data: list[IncomeRow] = Field(min_length=1)
    estimator: Literal["ebc", "beta", "dr"] = "beta"
    m: Optional[Union[int, Literal["sqrt-n"]]] = None
    link: Literal["logit", "probit"] = "logit"
    design: Literal["linear", "quadratic"] = "linear"
    tau: float = 0.0
    grid: Optional[GridSpec] = None
    n_boot: int = 500
    alpha: float = 0.05
    group_a: Optional[str] = None
    group_b: Optional[str] = None
    seed: Optional[int] = None


class BandPoint(BaseModel):
    s: float
    center: float
    pointwise_lo: float
    pointwise_hi: float
    uniform_lo: float
    uniform_hi: float
    sigma: float


class DominanceSummary(BaseModel):
    intervals: list[tuple[float, float]]
    nonempty: bool
    violation: bool


class BandsResponse(BaseModel):
    points: list[BandPoint]
    estimator: str
    tau: float
    alpha: float
    n_boot: int
    critical_value: float
    redraws: int = 0
    dominance: Optional[DominanceSummary] = None


class SimulateRequest(BaseModel):
    family: Literal["gaussian", "clayton", "gumbel", "independence"]
    theta: Optional[float] = None
    tau_k: Optional[float] = None
    n: int = Field(ge=2)
    reps: int = Field(default=1000, ge=1)
    tau: float = 0.0
    estimators: list[str] = Field(min_length=1)
    seed: Optional[int] = None
    overlay_reps: Optional[int] = None


class MetricRow(BaseModel):
    estimator: str
    risb_x100: float
    rimse_x100: float
    failures: int


class OverlayRow(BaseModel):
    s: float
    value: float
    series: str


class SimulateResponse(BaseModel):
    family: str
    theta: Optional[float]
    kendall_tau: Optional[float]
    n: int
    reps: int
    tau: float
    seed_used: int
    metrics: list[MetricRow]
    overlay: Optional[list[OverlayRow]] = None
