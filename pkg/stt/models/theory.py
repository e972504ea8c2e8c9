# stt/models/theory.py
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FMatrix:
    lag: int   # t - k, never positive
    dt: float

    @property
    def matrix(self) -> np.ndarray:
        d = self.lag * self.dt
        return np.array([[1.0, d], [d, d * d]])


@dataclass(frozen=True, eq=False)
class PBar:
    """Weighted projection sum over the bearings one observer fuses at one step."""
    matrix: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))
