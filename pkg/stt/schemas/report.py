# stt/schemas/report.py
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class SteadyStateStats(BaseModel):
    start_step: int
    end_step: int
    position_mean: float = Field(ge=0)
    position_max: float = Field(ge=0)
    velocity_mean: float = Field(ge=0)
    velocity_max: float = Field(ge=0)


class RmseReport(BaseModel):
    """Per-step RMSE pooled over every (observer, trial) pair:
    rmse_k = sqrt( sum_{trial, i} ||x_hat_{i,k} - x_k||^2 / (trials * n) ).
    """
    model_config = ConfigDict(extra="forbid")

    estimator: str = "stt"
    trials: int = Field(ge=1)
    seed: int
    dt: float
    steps: List[int]
    position_rmse: List[float]
    velocity_rmse: List[float]
    steady_state: Optional[SteadyStateStats] = None


class CompareReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trials: int
    seed: int
    reports: Dict[str, RmseReport]


class SweepPoint(BaseModel):
    sigma: float
    steady_state: SteadyStateStats


class SweepReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    parameter: str
    trials: int
    seed: int
    points: List[SweepPoint]
    spearman_rho: Optional[float] = None
    monotone: bool


class CheckResult(BaseModel):
    name: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    passed: bool
    applicable: bool = True
    detail: str = ""


class VerificationReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class DecayReport(BaseModel):
    trials: int
    fitted_rate: Optional[float] = None
    bound: float
    max_ratio: Optional[float] = None
    fit_steps: List[int] = Field(default_factory=list)
    final_position_error: Optional[float] = None
    holds: bool
    applicable: bool = True


class TrialTraceDocument(BaseModel):
    """JSON form of a trial trace. `rows` carry the same keys as the CSV columns."""
    model_config = ConfigDict(extra="forbid")

    seed: int
    n: int
    dt: float
    columns: List[str]
    rows: List[Dict[str, float]]
    messages: List[List[List[float]]]
