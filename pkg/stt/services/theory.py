# stt/services/theory.py
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from stt.core.config import (
    DECAY_BURN_IN,
    DECAY_FLOOR,
    DECAY_SLACK,
    MIN_DECAY_TRIALS,
)
from stt.core.exceptions import ConfigurationException, InsufficientTrialsException
from stt.models.estimator import EstimatorState, NeighborMessage, StepWeights
from stt.models.geometry import Bearing, TransitionModel
from stt.models.history import HistoryRecord, HistoryStep
from stt.models.theory import FMatrix, PBar
from stt.models.trace import TrialTrace
from stt.schemas.params import AngleCondition, SttParams
from stt.schemas.report import DecayReport
from stt.schemas.scenario import LinearTrajectory, ScenarioConfig
from stt.services import batch
from stt.services.estimator import forgetting_factor, step
from stt.services.geometry import projection, pseudo_linearize, transition, unit_bearing
from stt.services.harness import simulate
from stt.utils.linalg import sigma_min, spd_inverse
from stt.utils.seeding import trial_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    applicable: bool = True


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def angle_between(gi: np.ndarray, gj: np.ndarray) -> float:
    return float(np.arccos(np.clip(np.dot(gi, gj), -1.0, 1.0)))


def sigma_min_projection_pair(gi: Bearing, gj: Bearing) -> float:
    return sigma_min(projection(gi).P + projection(gj).P)


def projection_pair_closed_form(gi: Bearing, gj: Bearing) -> float:
    return 1.0 - abs(float(np.dot(gi.g, gj.g)))


def pbar(bearings: Sequence[Bearing], weights: Sequence[float]) -> PBar:
    return PBar(sum(w * projection(g).P for g, w in zip(bearings, weights)))


def _has_separated_pair(bearings: Sequence[Bearing], weights: Sequence[float], cond: AngleCondition) -> bool:
    for a in range(len(bearings)):
        for b in range(a + 1, len(bearings)):
            if weights[a] < cond.alpha0 or weights[b] < cond.alpha0:
                continue
            theta = angle_between(bearings[a].g, bearings[b].g)
            if cond.theta0 <= theta <= math.pi - cond.theta0:
                return True
    return False


def pbar_lower_bound_check(bearings: Sequence[Bearing], weights: Sequence[float], cond: AngleCondition) -> BoundCheck:
    """sigma_min(sum alpha P) >= alpha0 (1 - cos theta0) whenever one well-separated pair is present."""
    lhs = sigma_min(pbar(bearings, weights).matrix)
    rhs = cond.pbar_bound
    if not _has_separated_pair(bearings, weights, cond):
        return BoundCheck(lhs=lhs, rhs=rhs, holds=False, applicable=False)
    # rounding slack on an equality case
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs >= rhs - 1e-12)


def f_delta(dt: float) -> float:
    """Smallest eigenvalue of [[2, -dt], [-dt, dt^2]], written without cancellation."""
    if not dt > 0:
        raise ConfigurationException(f"dt must be positive, got {dt}")
    d2 = dt * dt
    return 2.0 * d2 / (2.0 + d2 + math.sqrt(4.0 + d2 * d2))


def f_delta_eig(dt: float) -> float:
    pair = FMatrix(0, dt).matrix + FMatrix(-1, dt).matrix
    return float(np.linalg.eigvalsh(pair)[0])


def c_lower_bound(params: SttParams, model: TransitionModel, cond: AngleCondition, sigmaNu: float) -> float:
    a = model.normA * (1.0 + params.gamma1)
    return (a - 1.0) * a * sigmaNu ** 2 / (params.gamma2 * f_delta(model.dt) * cond.pbar_bound)


def gram_min_singular(history: HistoryRecord, k: Optional[int] = None) -> float:
    G, _ = batch.normal_equations(history, k, include_prior=False)
    return sigma_min(G)


def lemma2_decomposition(history: HistoryRecord, k: Optional[int] = None) -> np.ndarray:
    """(c / sigma_nu^2) sum lambda F kron Pbar + sum lambda (A^{t-k})^T A^{t-k}."""
    k = history.k if k is None else k
    params = history.params
    model = history.model
    total = np.zeros((6, 6))
    for t in range(1, k + 1):
        step_t = history.steps[t - 1]
        lam = forgetting_factor(params, model.normA, k - t)
        P_bar = sum(step_t.weights.alpha[j] * msg.H[:, :3] for j, msg in step_t.messages().items())
        pull = model.power(t - k)
        total += lam * (params.c * params.r_scalar * np.kron(FMatrix(t - k, model.dt).matrix, P_bar)
                        + pull.T @ pull)
    return total


def lemma2_residual(history: HistoryRecord, k: Optional[int] = None) -> float:
    """Largest element-wise gap, scaled by the largest entry when that exceeds 1."""
    G, _ = batch.normal_equations(history, k, include_prior=False)
    diff = np.max(np.abs(G - lemma2_decomposition(history, k)))
    return float(diff / max(1.0, float(np.max(np.abs(G)))))


def separated_bearings(rng: np.random.Generator, count: int, cond: AngleCondition) -> List[Bearing]:
    weights = [1.0 / count] * count
    while True:
        bearings = [Bearing(random_unit(rng)) for _ in range(count)]
        if _has_separated_pair(bearings, weights, cond):
            return bearings


def random_feasible_history(
    rng: np.random.Generator,
    k: int,
    model: TransitionModel,
    params: SttParams,
    cond: AngleCondition,
    max_bearings: int = 4,
) -> HistoryRecord:
    """Synthetic history whose every step fuses 2..max_bearings bearings with one well-separated pair."""
    history = HistoryRecord(observer_id=0, model=model, params=params, x0=np.zeros(6), M0=np.eye(6))
    for t in range(1, k + 1):
        count = int(rng.integers(2, max_bearings + 1))
        bearings = separated_bearings(rng, count, cond)
        msgs = {}
        for j, g in enumerate(bearings):
            meas = pseudo_linearize(g, rng.uniform(-30, 30, size=3))
            msgs[j] = NeighborMessage(sender=j, xPred=rng.normal(0, 10, size=6), z=meas.z, H=meas.H)
        weights = StepWeights.uniform(0, msgs)
        history.append(HistoryStep(
            t=t, own=msgs[0], received={j: m for j, m in msgs.items() if j != 0}, weights=weights,
        ))
    return history


def random_spd(rng: np.random.Generator, size: int = 6) -> np.ndarray:
    B = rng.standard_normal((size, size))
    return B @ B.T + size * np.eye(size)


# ---------------------------------------------------------------------------
# expected one-step error

@dataclass(frozen=True, eq=False)
class ExpectationCheck:
    sample_mean: np.ndarray
    expected: np.ndarray
    standard_error: np.ndarray
    draws: int

    @property
    def z_scores(self) -> np.ndarray:
        return np.abs(self.sample_mean - self.expected) / np.maximum(self.standard_error, 1e-300)

    @property
    def within(self) -> bool:
        return bool(np.all(self.z_scores <= 3.0))


def expected_error_check(
    rng: np.random.Generator,
    params: SttParams,
    model: TransitionModel,
    position_sigma: float = 0.5,
    n: int = 4,
    draws: int = 10_000,
) -> ExpectationCheck:
    """Monte Carlo of the one-step error of observer 0 against (sum lambda S)^{-1} E[eta_bar].

    Geometry, initial estimates and truth are fixed; only observer-position noise is drawn.
    Exact bearings make H deterministic, so the pseudo-measurement noise P eps is zero mean.
    """
    x0 = np.concatenate([rng.uniform(-10, 10, 3) + [0, 0, 20], rng.normal(0, 2, 3)])
    x1 = model.A @ x0
    observers = rng.uniform(-30, 30, size=(n, 3))
    offsets = rng.normal(0, 3, size=(n, 6))
    M0 = np.eye(6)
    states = [EstimatorState(xHat=x0 + offsets[j], MHat=M0) for j in range(n)]
    preds = [model.A @ s.xHat for s in states]
    projections = [projection(unit_bearing(x1[:3], observers[j])) for j in range(n)]
    weights = StepWeights.uniform(0, range(1, n))

    errors = np.empty((draws, 6))
    for d in range(draws):
        noisy = observers + position_sigma * rng.standard_normal((n, 3))
        meas = [pseudo_linearize(projections[j].bearing, noisy[j]) for j in range(n)]
        msgs = {j: NeighborMessage(sender=j, xPred=preds[j], z=meas[j].z, H=meas[j].H) for j in range(1, n)}
        new_state, _ = step(states[0], model, params, meas[0], msgs, weights)
        errors[d] = new_state.xHat - x1

    # closed form with the initial-condition term included
    a = model.normA * (1.0 + params.gamma1)
    lam1 = 1.0 / a
    lam0 = params.gamma2 / a ** 2
    r = params.r_scalar
    S1 = np.eye(6) + params.c * r * sum(weights.alpha[j] * projections[j].H.T @ projections[j].H for j in range(n))
    omega0 = spd_inverse(M0, "M0")
    Ainv = model.inverse
    G = lam1 * S1 + lam0 * Ainv.T @ omega0 @ Ainv
    eta_bar = lam1 * sum(weights.beta[j] * model.A @ offsets[j] for j in range(n)) \
        + lam0 * Ainv.T @ omega0 @ offsets[0]
    expected = np.linalg.solve(G, eta_bar)

    return ExpectationCheck(
        sample_mean=errors.mean(axis=0),
        expected=expected,
        standard_error=errors.std(axis=0, ddof=1) / math.sqrt(draws),
        draws=draws,
    )


# ---------------------------------------------------------------------------
# exponential decay of the noiseless error

def decay_scenario(rng: np.random.Generator, horizon: int = 200, min_angle_deg: float = 45.0) -> ScenarioConfig:
    """Three static observers around a slowly drifting target, pairwise bearings well separated."""
    p0 = np.array([0.0, 0.0, 15.0])
    lo = math.radians(min_angle_deg)
    while True:
        dirs = [random_unit(rng) for _ in range(3)]
        if all(lo <= angle_between(dirs[a], dirs[b]) <= math.pi - lo
               for a in range(3) for b in range(a + 1, 3)):
            break
    ranges = rng.uniform(15.0, 25.0, size=3)
    positions = [tuple(float(c) for c in p0 - r * u) for r, u in zip(ranges, dirs)]
    return ScenarioConfig(
        n=3,
        horizon=horizon,
        trajectory=LinearTrajectory(p0=tuple(float(c) for c in p0), v=(0.2, 0.1, 0.0)),
        noise={"bearing_sigma": 0.0, "position_sigma": 0.0},
        graph={"k": 2, "static": True, "drop_probability": 0.0},
        estimator={"sigma_nu": 0.005},
        observer_positions=positions,
    )


def decay_traces(trials: int, seed: int, horizon: int = 200) -> List[TrialTrace]:
    traces = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        cfg = decay_scenario(rng, horizon)
        traces.append(simulate(cfg, rng).trace)
    return traces


def decay_rate_check(
    traces: Sequence[TrialTrace],
    gamma1: float,
    gamma2: float,
    burn_in: int = DECAY_BURN_IN,
    floor: float = DECAY_FLOOR,
    slack: float = DECAY_SLACK,
) -> DecayReport:
    """Log-linear fit to the max-over-observers envelope of the trial-mean error norm."""
    trials = len(traces)
    if trials < MIN_DECAY_TRIALS:
        raise InsufficientTrialsException(trials, MIN_DECAY_TRIALS)
    bound = (1.0 + gamma2) / (1.0 + gamma1)
    if not gamma1 > gamma2:
        return DecayReport(trials=trials, bound=bound, holds=False, applicable=False)

    norms = np.stack([np.linalg.norm(tr.axis_errors, axis=-1) for tr in traces])   # (trials, H, n)
    if norms.shape[1] == 0:
        logger.warning("Decay check skipped: traces have no steps")
        return DecayReport(trials=trials, bound=bound, holds=False, applicable=False)
    envelope = norms.mean(axis=0).max(axis=1)
    final_pos = float(np.stack([tr.position_errors[-1] for tr in traces]).mean(axis=0).max())

    steps = []
    for k in range(burn_in, envelope.shape[0] + 1):
        if envelope[k - 1] <= floor:
            break
        steps.append(k)
    if len(steps) < 2:
        return DecayReport(trials=trials, bound=bound, fit_steps=steps, final_position_error=final_pos,
                           holds=bool(envelope[-1] <= floor))

    logs = np.log(envelope[np.array(steps) - 1])
    slope = np.polyfit(np.array(steps, dtype=float), logs, 1)[0]
    rate = float(math.exp(slope))
    ratios = envelope[np.array(steps[1:]) - 1] / envelope[np.array(steps[:-1]) - 1]
    max_ratio = float(ratios.max())
    # both the fitted rate and every single-step ratio must stay under the bound
    report = DecayReport(
        trials=trials,
        fitted_rate=rate,
        bound=bound,
        max_ratio=max_ratio,
        fit_steps=steps,
        final_position_error=final_pos,
        holds=rate <= bound + slack and max_ratio <= bound + slack,
    )
    logger.info(
        "Decay fit over steps %d..%d: rate %.4f, worst step ratio %.4f (bound %.4f)",
        steps[0], steps[-1], rate, max_ratio, bound,
    )
    return report
