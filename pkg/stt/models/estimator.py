# stt/models/estimator.py
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np

from stt.core.config import WEIGHT_SUM_TOL
from stt.core.exceptions import ConfigurationException

RECORD_LENGTH = 27


@dataclass(frozen=True, eq=False)
class EstimatorState:
    xHat: np.ndarray
    MHat: np.ndarray
    step: int = 0


@dataclass(frozen=True, eq=False)
class NeighborMessage:
    """What observer j shares at step k: its prediction and its own pseudo-measurement."""
    sender: int
    xPred: np.ndarray
    z: np.ndarray
    H: np.ndarray

    def to_record(self) -> List[float]:
        # x_pred (6), z (3), H row-major (18)
        return [float(v) for v in np.concatenate([self.xPred, self.z, self.H.ravel()])]

    @classmethod
    def from_record(cls, sender: int, record: Sequence[float]) -> "NeighborMessage":
        if len(record) != RECORD_LENGTH:
            raise ConfigurationException(
                f"Message record must hold {RECORD_LENGTH} numbers, got {len(record)}"
            )
        values = np.asarray(record, dtype=float)
        return cls(
            sender=sender,
            xPred=values[:6].copy(),
            z=values[6:9].copy(),
            H=values[9:].reshape(3, 6).copy(),
        )


@dataclass(frozen=True)
class StepWeights:
    self_id: int
    alpha: Dict[int, float]
    beta: Dict[int, float]
    # set by constructors that already guarantee validate() passes
    checked: bool = field(default=False, compare=False, repr=False)

    @classmethod
    def uniform(cls, self_id: int, received: Iterable[int]) -> "StepWeights":
        ids = [self_id] + sorted(j for j in set(received) if j != self_id)
        w = 1.0 / len(ids)
        return cls(self_id=self_id, alpha={j: w for j in ids}, beta={j: w for j in ids}, checked=True)

    @property
    def neighbor_ids(self) -> List[int]:
        return sorted(j for j in self.alpha if j != self.self_id)

    def validate(self) -> "StepWeights":
        for name, weights in (("alpha", self.alpha), ("beta", self.beta)):
            if self.self_id not in weights:
                raise ConfigurationException(f"{name} weights omit the observer itself ({self.self_id})")
            if any(w < 0 for w in weights.values()):
                raise ConfigurationException(f"{name} weights must be non-negative")
            total = sum(weights.values())
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise ConfigurationException(f"{name} weights sum to {total!r}, expected 1")
        if set(self.alpha) != set(self.beta):
            raise ConfigurationException("alpha and beta weights cover different observers")
        return self

    def restrict(self, received: Iterable[int]) -> "StepWeights":
        """Keep self plus the neighbours actually heard from and renormalise both maps."""
        keep = {self.self_id} | (set(received) & set(self.alpha))

        def renormalize(weights: Dict[int, float]) -> Dict[int, float]:
            kept = {j: weights[j] for j in sorted(keep)}
            total = sum(kept.values())
            if total <= 0:
                return {j: 1.0 / len(kept) for j in kept}
            # rounding drift goes onto the self weight
            scaled = {j: w / total for j, w in kept.items()}
            drift = 1.0 - sum(scaled.values())
            scaled[self.self_id] += drift
            return scaled

        return StepWeights(self_id=self.self_id, alpha=renormalize(self.alpha), beta=renormalize(self.beta))


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Every observer's estimate stacked by id: xHat (n, 6), MHat (n, 6, 6)."""
    xHat: np.ndarray
    MHat: np.ndarray
    step: int = 0

    @property
    def count(self) -> int:
        return self.xHat.shape[0]

    def observer(self, i: int) -> EstimatorState:
        return EstimatorState(xHat=self.xHat[i], MHat=self.MHat[i], step=self.step)
