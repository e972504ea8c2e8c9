# stt/services/estimator.py
import logging
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from stt.core.exceptions import ConfigurationException
from stt.models.estimator import EstimatorState, NeighborMessage, NetworkState, StepWeights
from stt.models.geometry import PseudoMeasurement, TransitionModel
from stt.models.history import HistoryRecord, HistoryStep
from stt.models.world import CommGraph
from stt.schemas.params import SttParams
from stt.utils.linalg import require_spd, spd_inverse, spd_inverse_batch, symmetrize

logger = logging.getLogger(__name__)

I6 = np.eye(6)


def forgetting_factor(params: SttParams, normA: float, lag: int) -> float:
    """lambda = gamma2^lag / (|A| (1 + gamma1))^(lag + 1)."""
    if lag < 0:
        raise ConfigurationException(f"Forgetting-factor lag must be >= 0, got {lag}")
    a = normA * (1.0 + params.gamma1)
    return params.gamma2 ** lag / a ** (lag + 1)


def predict(state: EstimatorState, model: TransitionModel, params: SttParams) -> Tuple[np.ndarray, np.ndarray]:
    xPred = model.A @ state.xHat
    AMAt = model.A @ state.MHat @ model.A.T
    MPredInvTerm = spd_inverse(AMAt, "A M A^T") / ((1.0 + params.gamma1) * model.normA)
    return xPred, MPredInvTerm


def _check_weight_keys(self_id: int, msgs: Mapping[int, NeighborMessage], w: StepWeights):
    expected = {self_id} | set(msgs)
    if set(w.alpha) != expected or set(w.beta) != expected:
        raise ConfigurationException(
            f"Observer {self_id}: weights cover {sorted(w.alpha)} but messages came from {sorted(expected)}"
        )


def _as_mapping(msgs) -> Dict[int, NeighborMessage]:
    if isinstance(msgs, Mapping):
        return dict(msgs)
    return {m.sender: m for m in msgs}


def innovate(
    xPred: np.ndarray,
    own: PseudoMeasurement,
    msgs,
    w: StepWeights,
    params: SttParams,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    received = _as_mapping(msgs)
    received.pop(w.self_id, None)
    if not w.checked:
        w.validate()
    _check_weight_keys(w.self_id, received, w)

    r = params.r_scalar
    ids = sorted(received)
    alpha = np.array([w.alpha[w.self_id]] + [w.alpha[j] for j in ids])
    z = np.stack([own.z] + [received[j].z for j in ids])
    H = np.stack([own.H] + [received[j].H for j in ids])

    weighted = alpha[:, None, None] * H
    residual = z - H @ xPred
    eMeas = params.c * r * np.einsum("mij,mi->j", weighted, residual)
    info = r * np.einsum("mij,mik->jk", weighted, H)

    # self term is identically zero
    eCons = np.zeros(6)
    if ids:
        beta = np.array([w.beta[j] for j in ids])
        eCons = beta @ (np.stack([received[j].xPred for j in ids]) - xPred)

    S = params.c * info + I6
    return eMeas, eCons, S


def correct(
    xPred: np.ndarray,
    MPredInvTerm: np.ndarray,
    eMeas: np.ndarray,
    eCons: np.ndarray,
    S: np.ndarray,
    params: SttParams,
    method: str = "direct",
    step: int = 0,
) -> EstimatorState:
    if method == "direct":
        # spd_inverse rejects anything that is not positive definite
        M = spd_inverse(params.gamma2 * MPredInvTerm + S, f"gamma2 M^- + S at step {step}")
    elif method == "ucv":
        # (gamma2 M^- + S)^{-1} = (I - (gamma2 S^{-1} M^- + I)^{-1}) (gamma2 M^-)^{-1}
        inner = params.gamma2 * np.linalg.solve(S, MPredInvTerm) + I6
        M = (I6 - np.linalg.inv(inner)) @ np.linalg.inv(params.gamma2 * MPredInvTerm)
        M = require_spd(symmetrize(M), f"M at step {step}")
    else:
        raise ConfigurationException(f"Unknown correction method: {method}")
    xHat = xPred + M @ (eMeas + eCons)
    return EstimatorState(xHat=xHat, MHat=M, step=step)


def broadcast(state: EstimatorState, model: TransitionModel, own: PseudoMeasurement, observer_id: int) -> NeighborMessage:
    return NeighborMessage(sender=observer_id, xPred=model.A @ state.xHat, z=own.z, H=own.H)


def step(
    state: EstimatorState,
    model: TransitionModel,
    params: SttParams,
    own: PseudoMeasurement,
    msgs,
    w: StepWeights,
    method: str = "direct",
) -> Tuple[EstimatorState, NeighborMessage]:
    xPred, MPredInvTerm = predict(state, model, params)
    eMeas, eCons, S = innovate(xPred, own, msgs, w, params)
    new_state = correct(xPred, MPredInvTerm, eMeas, eCons, S, params, method=method, step=state.step + 1)
    return new_state, NeighborMessage(sender=w.self_id, xPred=xPred, z=own.z, H=own.H)


def uniform_weights(self_id: int, received: Iterable[int]) -> StepWeights:
    return StepWeights.uniform(self_id, received)


def uniform_weight_matrix(graph: CommGraph) -> np.ndarray:
    """Row i is uniform_weights for observer i over itself and everyone it hears in graph."""
    W = np.eye(graph.n)
    for i, j in graph.graph.edges:
        W[i, j] = 1.0
    return W / W.sum(axis=1, keepdims=True)


def network_step(
    state: NetworkState,
    model: TransitionModel,
    params: SttParams,
    z: np.ndarray,
    H: np.ndarray,
    W: np.ndarray,
) -> Tuple[NetworkState, np.ndarray]:
    """One direct-correction step for every observer at once.

    z is (n, 3) and H is (n, 3, 6), one pseudo-measurement per observer. W[i, j] is the
    weight observer i gives j for both the measurement and the consensus term; rows sum
    to one and W[i, j] is zero when i does not hear j. Returns the new state and the
    predictions every observer broadcast.
    """
    n = state.count
    A = model.A
    xPred = state.xHat @ A.T
    MPredInvTerm = spd_inverse_batch(A @ state.MHat @ A.T, "A M A^T") / ((1.0 + params.gamma1) * model.normA)

    r = params.r_scalar
    Ht = np.swapaxes(H, 1, 2)
    HtH = (Ht @ H).reshape(n, 36)
    Htz = (Ht @ z[:, :, None])[:, :, 0]
    info = r * (W @ HtH).reshape(n, 6, 6)
    eMeas = params.c * (r * (W @ Htz) - (info @ xPred[:, :, None])[:, :, 0])
    eCons = W @ xPred - W.sum(axis=1)[:, None] * xPred

    S = params.c * info + I6
    M = spd_inverse_batch(params.gamma2 * MPredInvTerm + S, f"gamma2 M^- + S at step {state.step + 1}")
    xHat = xPred + (M @ (eMeas + eCons)[:, :, None])[:, :, 0]
    return NetworkState(xHat=xHat, MHat=M, step=state.step + 1), xPred


class SttObserver:
    """One observer running the recursion, optionally recording what it consumed."""

    def __init__(
        self,
        observer_id: int,
        x0: np.ndarray,
        M0: np.ndarray,
        model: TransitionModel,
        params: SttParams,
        record_history: bool = False,
        method: str = "direct",
    ):
        self.observer_id = observer_id
        self.model = model
        self.params = params
        self.method = method
        self.state = EstimatorState(xHat=np.asarray(x0, dtype=float), MHat=require_spd(M0, "M0"), step=0)
        self.history: Optional[HistoryRecord] = None
        if record_history:
            self.history = HistoryRecord(
                observer_id=observer_id, model=model, params=params,
                x0=self.state.xHat.copy(), M0=self.state.MHat.copy(),
            )
        self._pending: Optional[PseudoMeasurement] = None

    def broadcast(self, own: PseudoMeasurement) -> NeighborMessage:
        self._pending = own
        return broadcast(self.state, self.model, own, self.observer_id)

    def update(self, received: Mapping[int, NeighborMessage], weights: StepWeights) -> EstimatorState:
        if self._pending is None:
            raise RuntimeError(f"Observer {self.observer_id} must broadcast before consuming")
        own = self._pending
        received = {j: m for j, m in received.items() if j != self.observer_id}
        self.state, outgoing = step(self.state, self.model, self.params, own, received, weights, self.method)
        if self.history is not None:
            self.history.append(HistoryStep(t=self.state.step, own=outgoing, received=received, weights=weights))
        self._pending = None
        return self.state
