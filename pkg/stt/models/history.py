# stt/models/history.py
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from stt.models.estimator import NeighborMessage, StepWeights
from stt.models.geometry import TransitionModel
from stt.schemas.params import SttParams


@dataclass(frozen=True, eq=False)
class HistoryStep:
    """Everything observer i consumed at one step: its own broadcast and what it received."""
    t: int
    own: NeighborMessage
    received: Dict[int, NeighborMessage]
    weights: StepWeights

    def messages(self) -> Dict[int, NeighborMessage]:
        out = {self.own.sender: self.own}
        out.update(self.received)
        return out


@dataclass(eq=False)
class HistoryRecord:
    observer_id: int
    model: TransitionModel
    params: SttParams
    x0: np.ndarray
    M0: np.ndarray
    steps: List[HistoryStep] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.steps)

    def append(self, step: HistoryStep):
        expected = self.k + 1
        if step.t != expected:
            raise ValueError(f"History step {step.t} recorded out of order, expected {expected}")
        self.steps.append(step)

    def truncated(self, k: int) -> "HistoryRecord":
        return HistoryRecord(
            observer_id=self.observer_id,
            model=self.model,
            params=self.params,
            x0=self.x0,
            M0=self.M0,
            steps=self.steps[:k],
        )


@dataclass(frozen=True, eq=False)
class BatchTerms:
    yT: np.ndarray
    sT: np.ndarray
    lam: float
