# stt/models/trace.py
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class TrialTrace:
    """Per-step record of one trial. Arrays are indexed by step - 1."""
    dt: float
    truth: np.ndarray            # (H, 6)
    estimates: np.ndarray        # (H, n, 6)
    messages: np.ndarray         # (H, n, 27)
    observer_positions: np.ndarray  # (n, 3) at step 0
    ckf: Optional[np.ndarray] = None   # (H, 6)
    plkf: Optional[np.ndarray] = None  # (H, n, 6)

    @property
    def horizon(self) -> int:
        return self.truth.shape[0]

    @property
    def n(self) -> int:
        return self.observer_positions.shape[0]

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)

    @property
    def axis_errors(self) -> np.ndarray:
        return self.estimates - self.truth[:, None, :]

    @property
    def position_errors(self) -> np.ndarray:
        return np.linalg.norm(self.axis_errors[..., :3], axis=-1)

    @property
    def velocity_errors(self) -> np.ndarray:
        return np.linalg.norm(self.axis_errors[..., 3:], axis=-1)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.truth)) and np.all(np.isfinite(self.estimates)))
