# stt/services/baselines.py
import logging
from typing import List, Sequence

import numpy as np

from stt.core.exceptions import ConfigurationException
from stt.models.baselines import CkfState, PlkfBank
from stt.models.geometry import BearingObservation, PseudoMeasurement, TransitionModel
from stt.schemas.params import BaselineParams
from stt.services.geometry import pseudo_linearize
from stt.utils.linalg import require_spd, sigma_min, symmetrize

logger = logging.getLogger(__name__)

DEGENERATE_SIGMA = 1e-9


def white_noise_q(dt: float, q: float) -> np.ndarray:
    """Discretised continuous white-noise acceleration, intensity q."""
    I3 = np.eye(3)
    return q * np.block([
        [dt ** 3 / 3.0 * I3, dt ** 2 / 2.0 * I3],
        [dt ** 2 / 2.0 * I3, dt * I3],
    ])


def ckf_init(x0: np.ndarray, params: BaselineParams, model: TransitionModel, sigma_nu: float) -> CkfState:
    P0 = np.diag([params.initial_position_sigma ** 2] * 3 + [params.initial_velocity_sigma ** 2] * 3)
    return CkfState(
        xHat=np.asarray(x0, dtype=float),
        P=P0,
        Q=white_noise_q(model.dt, params.q),
        sigma_nu=sigma_nu,
    )


def ckf_predict(state: CkfState, model: TransitionModel) -> CkfState:
    return CkfState(
        xHat=model.A @ state.xHat,
        P=symmetrize(model.A @ state.P @ model.A.T + state.Q),
        Q=state.Q,
        sigma_nu=state.sigma_nu,
        step=state.step,
    )


def stacked_geometry_sigma(measurements: Sequence[PseudoMeasurement]) -> float:
    return sigma_min(sum(m.P.P for m in measurements))


def stacked_rank(measurements: Sequence[PseudoMeasurement]) -> int:
    H = np.vstack([m.H for m in measurements])
    return int(np.linalg.matrix_rank(H, tol=1e-9))


def ckf_update(state: CkfState, measurements: Sequence[PseudoMeasurement]) -> CkfState:
    if not measurements:
        raise ConfigurationException("CKF update needs at least one observation")
    if len(measurements) > 1 and stacked_geometry_sigma(measurements) < DEGENERATE_SIGMA:
        logger.warning(
            "Step %d: stacked bearings are parallel; covariance will inflate along the line of sight",
            state.step + 1,
        )
    z = np.concatenate([m.z for m in measurements])
    H = np.vstack([m.H for m in measurements])
    R = state.Rstack(len(measurements))

    innovation_cov = H @ state.P @ H.T + R
    gain = np.linalg.solve(innovation_cov, H @ state.P).T
    x = state.xHat + gain @ (z - H @ state.xHat)
    # Joseph form keeps P symmetric positive definite
    I_KH = np.eye(6) - gain @ H
    P = symmetrize(I_KH @ state.P @ I_KH.T + gain @ R @ gain.T)
    require_spd(P, f"CKF covariance at step {state.step + 1}")
    return CkfState(xHat=x, P=P, Q=state.Q, sigma_nu=state.sigma_nu, step=state.step + 1)


def _linearize_all(observations: Sequence[BearingObservation]) -> List[PseudoMeasurement]:
    return [pseudo_linearize(obs.gTilde, obs.sTilde) for obs in observations]


def ckf_step(state: CkfState, model: TransitionModel, observations: Sequence[BearingObservation]) -> CkfState:
    """Centralised filter: predict, then one update with every observer's pseudo-measurement stacked."""
    return ckf_update(ckf_predict(state, model), _linearize_all(observations))


def plkf_step(state: CkfState, model: TransitionModel, own: BearingObservation) -> CkfState:
    return ckf_step(state, model, [own])


def plkf_bank_init(x0s: np.ndarray, params: BaselineParams, model: TransitionModel, sigma_nu: float) -> PlkfBank:
    first = ckf_init(np.zeros(6), params, model, sigma_nu)
    x0s = np.asarray(x0s, dtype=float)
    return PlkfBank(
        xHat=x0s.copy(),
        P=np.broadcast_to(first.P, (x0s.shape[0], 6, 6)).copy(),
        Q=first.Q,
        sigma_nu=sigma_nu,
    )


def plkf_bank_step(bank: PlkfBank, model: TransitionModel, z: np.ndarray, H: np.ndarray) -> PlkfBank:
    """plkf_step for every observer at once; z is (n, 3), H is (n, 3, 6)."""
    A = model.A
    x = bank.xHat @ A.T
    P = symmetrize(A @ bank.P @ A.T + bank.Q)
    R = np.eye(3) * bank.sigma_nu ** 2

    HP = H @ P
    innovation_cov = HP @ np.swapaxes(H, 1, 2) + R
    gain = np.swapaxes(np.linalg.solve(innovation_cov, HP), 1, 2)
    x = x + (gain @ (z - (H @ x[:, :, None])[:, :, 0])[:, :, None])[:, :, 0]
    I_KH = np.eye(6) - gain @ H
    P = symmetrize(I_KH @ P @ np.swapaxes(I_KH, 1, 2) + gain @ R @ np.swapaxes(gain, 1, 2))
    require_spd(P, f"PLKF covariance at step {bank.step + 1}")
    return PlkfBank(xHat=x, P=P, Q=bank.Q, sigma_nu=bank.sigma_nu, step=bank.step + 1)
