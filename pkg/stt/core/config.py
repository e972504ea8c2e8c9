from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

# Values tuned for the simulated network (n=10 observers, three neighbours).
DEFAULT_C = 1.8202
DEFAULT_GAMMA1 = 7.1609
DEFAULT_GAMMA2 = 6.1323

DEFAULT_DT = 0.1
DEFAULT_HORIZON = 1000
DEFAULT_OBSERVERS = 10
DEFAULT_NEIGHBORS = 3
DEFAULT_BEARING_SIGMA = 0.1
DEFAULT_NOMINAL_RANGE = 10.0

CUBE_LOWER = (-30.0, -30.0, 0.0)
CUBE_UPPER = (30.0, 30.0, 40.0)

# numeric tolerances
UNIT_NORM_TOL = 1e-9
SYMMETRY_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-12
IDENTITY_RTOL = 1e-9

MIN_DECAY_TRIALS = 100
DECAY_BURN_IN = 5
DECAY_FLOOR = 1e-8
DECAY_SLACK = 0.05

SWEEP_BEARING_SIGMAS = (0.01, 0.05, 0.1, 0.2, 0.3)
SWEEP_POSITION_SIGMAS = (0.0, 0.1, 0.5)


class Settings(BaseModel):
    """Runtime options for one CLI invocation. Populated from flags only."""
    model_config = ConfigDict(extra="forbid")

    log_level: str = "INFO"
    log_file: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    burn_in_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    bearing_sigmas: Tuple[float, ...] = SWEEP_BEARING_SIGMAS
    position_sigmas: Tuple[float, ...] = SWEEP_POSITION_SIGMAS


settings = Settings()
