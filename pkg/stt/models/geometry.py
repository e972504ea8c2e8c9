# stt/models/geometry.py
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

I3 = np.eye(3)
ZERO3 = np.zeros((3, 3))


@dataclass(frozen=True, eq=False)
class TargetState:
    p: np.ndarray
    v: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v])

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Constant-velocity transition x_{k+1} = A x_k for sampling time dt."""
    dt: float
    A: np.ndarray = field(repr=False)
    block: np.ndarray = field(repr=False)
    normA: float

    @cached_property
    def block_inverse(self) -> np.ndarray:
        return np.array([[1.0, -self.dt], [0.0, 1.0]])

    def block_power(self, m: int) -> np.ndarray:
        if m >= 0:
            return np.linalg.matrix_power(self.block, m)
        return np.linalg.matrix_power(self.block_inverse, -m)

    def power(self, m: int) -> np.ndarray:
        """A^m for any integer m, including the backward pullbacks A^{t-k}."""
        return np.kron(self.block_power(m), I3)

    @cached_property
    def inverse(self) -> np.ndarray:
        return self.power(-1)


@dataclass(frozen=True, eq=False)
class Bearing:
    g: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    P: np.ndarray
    bearing: Bearing

    @property
    def H(self) -> np.ndarray:
        return np.hstack([self.P, ZERO3])


@dataclass(frozen=True, eq=False)
class PseudoMeasurement:
    z: np.ndarray
    H: np.ndarray
    P: ProjectionMatrix
    sTilde: np.ndarray


@dataclass(frozen=True, eq=False)
class BearingObservation:
    observer_id: int
    gTilde: Bearing
    sTilde: np.ndarray
