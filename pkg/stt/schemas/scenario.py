# stt/schemas/scenario.py
import json
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from stt.core import config
from stt.core.exceptions import ConfigurationException
from stt.schemas.params import BaselineParams, SttParams

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CubeConfig(_Strict):
    lower: Vec3 = config.CUBE_LOWER
    upper: Vec3 = config.CUBE_UPPER

    @model_validator(mode="after")
    def check_bounds(self):
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("cube.lower must be strictly below cube.upper on every axis")
        return self


class CircleTrajectory(_Strict):
    kind: Literal["circle"] = "circle"
    p0: Vec3 = (15.0, 0.0, 5.0)
    speed: float = Field(default=5.0, gt=0)
    # v(t) = speed [sin(w t), cos(w t), 0] with w = 1/(10 pi) rad/s
    omega: float = Field(default=1.0 / (10.0 * math.pi), gt=0)


class SquareTrajectory(_Strict):
    kind: Literal["square"] = "square"
    p0: Vec3 = (20.0, 20.0, 5.0)
    v0: Vec3 = (0.0, -6.0, 0.0)
    turn_period: float = Field(default=6.0, gt=0, description="Seconds between clockwise 90 degree turns")


class LinearTrajectory(_Strict):
    kind: Literal["linear"] = "linear"
    p0: Vec3 = (0.0, 0.0, 10.0)
    v: Vec3 = (1.0, 0.0, 0.0)


class WaypointTrajectory(_Strict):
    kind: Literal["waypoints"] = "waypoints"
    points: List[Vec3] = Field(min_length=2)
    speed: float = Field(gt=0)
    loop: bool = False

    @field_validator("points")
    @classmethod
    def distinct_consecutive(cls, points: List[Vec3]) -> List[Vec3]:
        for a, b in zip(points, points[1:]):
            if a == b:
                raise ValueError("consecutive waypoints must differ")
        return points


Trajectory = Annotated[
    Union[CircleTrajectory, SquareTrajectory, LinearTrajectory, WaypointTrajectory],
    Field(discriminator="kind"),
]


class NoiseConfig(_Strict):
    bearing_sigma: float = Field(default=config.DEFAULT_BEARING_SIGMA, ge=0, description="rad")
    position_sigma: float = Field(default=0.0, ge=0, description="m, per axis")


class GraphConfig(_Strict):
    k: int = Field(default=config.DEFAULT_NEIGHBORS, ge=0)
    static: bool = Field(default=True, description="Keep the KNN graph fixed for a whole trial")
    drop_probability: float = Field(default=0.0, ge=0, le=1)


class EstimatorConfig(_Strict):
    c: float = Field(default=config.DEFAULT_C, gt=0)
    gamma1: float = Field(default=config.DEFAULT_GAMMA1, gt=0)
    gamma2: float = Field(default=config.DEFAULT_GAMMA2, gt=0)
    sigma_nu: Optional[float] = Field(default=None, gt=0, description="Derived from the noise levels when omitted")
    nominal_range: float = Field(default=config.DEFAULT_NOMINAL_RANGE, gt=0)
    initial_m_scale: float = Field(default=1.0, gt=0)


class ObserverPath(_Strict):
    points: List[Vec3] = Field(min_length=2)
    speed: float = Field(gt=0)
    loop: bool = True


class ScenarioConfig(_Strict):
    cube: CubeConfig = CubeConfig()
    n: int = Field(default=config.DEFAULT_OBSERVERS, ge=1)
    dt: float = Field(default=config.DEFAULT_DT, gt=0)
    horizon: int = Field(default=config.DEFAULT_HORIZON, ge=0)
    trajectory: Trajectory = CircleTrajectory()
    noise: NoiseConfig = NoiseConfig()
    graph: GraphConfig = GraphConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    baseline: BaselineParams = BaselineParams()
    observer_positions: Optional[List[Vec3]] = None
    observer_paths: Optional[List[ObserverPath]] = None
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def check_consistency(self):
        if self.graph.k >= self.n and not (self.n == 1 and self.graph.k == 0):
            raise ValueError(f"graph.k ({self.graph.k}) must be smaller than n ({self.n})")
        if self.observer_positions is not None and len(self.observer_positions) != self.n:
            raise ValueError(f"observer_positions lists {len(self.observer_positions)} entries for n={self.n}")
        if self.observer_paths is not None and len(self.observer_paths) != self.n:
            raise ValueError(f"observer_paths lists {len(self.observer_paths)} entries for n={self.n}")
        if self.observer_positions is not None and self.observer_paths is not None:
            raise ValueError("give observer_positions or observer_paths, not both")
        if not self.estimator.gamma1 > self.estimator.gamma2:
            raise ValueError("estimator.gamma1 must exceed estimator.gamma2")
        return self

    @property
    def sigma_nu(self) -> float:
        if self.estimator.sigma_nu is not None:
            return self.estimator.sigma_nu
        return math.sqrt(
            self.noise.position_sigma ** 2
            + (self.estimator.nominal_range * self.noise.bearing_sigma) ** 2
        )

    def stt_params(self) -> SttParams:
        sigma_nu = self.sigma_nu
        if sigma_nu <= 0:
            raise ConfigurationException(
                "estimator.sigma_nu: derived value is 0 for a noiseless scenario; set it explicitly"
            )
        return SttParams(
            c=self.estimator.c,
            gamma1=self.estimator.gamma1,
            gamma2=self.estimator.gamma2,
            sigma_nu=sigma_nu,
        )

    def canonical(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"seed"})


def describe_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def scenario_from_dict(payload: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigurationException(f"Invalid scenario config: {describe_validation_error(exc)}")


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationException(f"Config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationException(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})")
    if not isinstance(payload, dict):
        raise ConfigurationException(f"{path}: top level must be a JSON object")
    cfg = scenario_from_dict(payload)
    logger.debug("Loaded scenario from %s (n=%d, horizon=%d, trajectory=%s)",
                 path, cfg.n, cfg.horizon, cfg.trajectory.kind)
    return cfg
