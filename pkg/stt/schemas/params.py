# stt/schemas/params.py
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stt.core.config import DEFAULT_C, DEFAULT_GAMMA1, DEFAULT_GAMMA2


class SttParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    c: float = Field(default=DEFAULT_C, gt=0, description="Measurement-vs-consensus weight")
    gamma1: float = Field(default=DEFAULT_GAMMA1, gt=0)
    gamma2: float = Field(default=DEFAULT_GAMMA2, gt=0)
    sigma_nu: float = Field(default=1.0, gt=0, description="Pseudo-measurement noise std (m)")

    @model_validator(mode="after")
    def check_gammas(self):
        if not self.gamma1 > self.gamma2:
            raise ValueError(f"gamma1 ({self.gamma1}) must exceed gamma2 ({self.gamma2})")
        return self

    @property
    def R(self) -> np.ndarray:
        return np.eye(3) / self.sigma_nu ** 2

    @property
    def r_scalar(self) -> float:
        return 1.0 / self.sigma_nu ** 2

    def rate_bound(self) -> float:
        return (1.0 + self.gamma2) / (1.0 + self.gamma1)


class BaselineParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    q: float = Field(default=1.0, gt=0, description="White-noise acceleration intensity (m^2/s^3)")
    initial_position_sigma: float = Field(default=30.0, gt=0)
    initial_velocity_sigma: float = Field(default=5.0, gt=0)


class AngleCondition(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    theta0: float = Field(gt=0, lt=math.pi / 2, description="Minimum pairwise bearing angle (rad)")
    alpha0: float = Field(gt=0, le=1, description="Minimum fusion weight")

    @property
    def pbar_bound(self) -> float:
        return self.alpha0 * (1.0 - math.cos(self.theta0))
