# stt/models/baselines.py
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag


@dataclass(frozen=True, eq=False)
class CkfState:
    xHat: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    sigma_nu: float
    step: int = 0

    @property
    def R(self) -> np.ndarray:
        return np.eye(3) * self.sigma_nu ** 2

    def Rstack(self, count: int) -> np.ndarray:
        return block_diag(*[self.R] * count)


@dataclass(frozen=True, eq=False)
class PlkfBank:
    """One single-observer filter per observer, stacked by id: xHat (n, 6), P (n, 6, 6)."""
    xHat: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    sigma_nu: float
    step: int = 0

    def filter(self, i: int) -> CkfState:
        return CkfState(xHat=self.xHat[i], P=self.P[i], Q=self.Q, sigma_nu=self.sigma_nu, step=self.step)
