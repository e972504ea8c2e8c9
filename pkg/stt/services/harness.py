# stt/services/harness.py
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from stt.core.config import Settings, settings
from stt.core.exceptions import ConfigurationException
from stt.models.estimator import RECORD_LENGTH, NetworkState
from stt.models.trace import TrialTrace
from stt.schemas.report import CompareReport, RmseReport, SteadyStateStats, SweepPoint, SweepReport
from stt.schemas.scenario import ScenarioConfig
from stt.services import baselines as bl
from stt.services.estimator import SttObserver, network_step, uniform_weight_matrix, uniform_weights
from stt.services.geometry import measurements_from_stack, pseudo_linearize_all, transition
from stt.services.world import (
    drop_links,
    knn_graph,
    observe_all,
    observer_positions_at,
    place_observers,
    target_state,
)
from stt.utils.seeding import trial_rng

logger = logging.getLogger(__name__)

ESTIMATORS = ("stt", "ckf", "plkf")


@dataclass
class TrialRun:
    trace: TrialTrace
    final: NetworkState
    # per-observer estimators; empty when the whole network was stepped at once
    observers: List[SttObserver] = field(default_factory=list)


def simulate(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    baselines: bool = False,
    record_history: bool = False,
    method: str = "direct",
) -> TrialRun:
    """One trial: synchronous rounds in which every observer broadcasts, then every observer consumes.

    Direct correction without history steps all observers together through network_step;
    otherwise each observer runs its own SttObserver. Both consume the same draws.
    """
    model = transition(cfg.dt)
    params = cfg.stt_params()
    n, H = cfg.n, cfg.horizon

    base = place_observers(cfg, rng)
    static_graph = knn_graph(base, cfg.graph.k)
    x0 = np.hstack([base, np.zeros((n, 3))])
    M0 = cfg.estimator.initial_m_scale * np.eye(6)

    per_observer = record_history or method != "direct"
    observers: List[SttObserver] = []
    network = NetworkState(xHat=x0.copy(), MHat=np.broadcast_to(M0, (n, 6, 6)).copy())
    if per_observer:
        observers = [
            SttObserver(i, x0[i], M0, model, params, record_history=record_history, method=method)
            for i in range(n)
        ]

    ckf = plkf = None
    if baselines:
        ckf = bl.ckf_init(np.concatenate([base.mean(axis=0), np.zeros(3)]), cfg.baseline, model, params.sigma_nu)
        plkf = bl.plkf_bank_init(x0, cfg.baseline, model, params.sigma_nu)

    truth = np.zeros((H, 6))
    estimates = np.zeros((H, n, 6))
    messages = np.zeros((H, n, RECORD_LENGTH))
    ckf_est = np.zeros((H, 6)) if baselines else None
    plkf_est = np.zeros((H, n, 6)) if baselines else None

    weights_for, W = None, None
    for k in range(1, H + 1):
        x_true = target_state(cfg, k)
        positions = observer_positions_at(cfg, base, k)
        gTilde, sTilde = observe_all(x_true, positions, cfg.noise, rng)
        Z, Hs, P = pseudo_linearize_all(gTilde, sTilde)
        measurements = None
        if per_observer or baselines:
            measurements = measurements_from_stack(gTilde, sTilde, Z, Hs, P)

        graph = static_graph if cfg.graph.static else knn_graph(positions, cfg.graph.k)
        graph = drop_links(graph, cfg.graph.drop_probability, rng)

        if per_observer:
            outbox = {i: observers[i].broadcast(measurements[i]) for i in range(n)}
            for i, observer in enumerate(observers):
                received = {j: outbox[j] for j in graph.neighbors(i)}
                estimates[k - 1, i] = observer.update(received, uniform_weights(i, received)).xHat
                messages[k - 1, i] = outbox[i].to_record()
        else:
            if graph is not weights_for:
                weights_for, W = graph, uniform_weight_matrix(graph)
            network, xPred = network_step(network, model, params, Z, Hs, W)
            estimates[k - 1] = network.xHat
            messages[k - 1] = np.concatenate([xPred, Z, Hs.reshape(n, 18)], axis=1)
        truth[k - 1] = x_true.vector

        if baselines:
            ckf = bl.ckf_update(bl.ckf_predict(ckf, model), measurements)
            ckf_est[k - 1] = ckf.xHat
            plkf = bl.plkf_bank_step(plkf, model, Z, Hs)
            plkf_est[k - 1] = plkf.xHat

    if per_observer:
        network = NetworkState(
            xHat=np.array([o.state.xHat for o in observers]),
            MHat=np.array([o.state.MHat for o in observers]),
            step=H,
        )
    trace = TrialTrace(
        dt=cfg.dt, truth=truth, estimates=estimates, messages=messages,
        observer_positions=base, ckf=ckf_est, plkf=plkf_est,
    )
    return TrialRun(trace=trace, final=network, observers=observers)


def run_trial(cfg: ScenarioConfig, seed: int, trial_index: int = 0, baselines: bool = False) -> TrialTrace:
    return simulate(cfg, trial_rng(seed, trial_index), baselines=baselines).trace


def _squared_errors(estimates: np.ndarray, truth: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    if estimates.ndim == 2:
        estimates = estimates[:, None, :]
    err = estimates - truth[:, None, :]
    pos = np.sum(err[..., :3] ** 2, axis=(1, 2))
    vel = np.sum(err[..., 3:] ** 2, axis=(1, 2))
    return pos, vel, estimates.shape[1]


def _trial_errors(job: Tuple[ScenarioConfig, int, int, bool]) -> Dict[str, Tuple[np.ndarray, np.ndarray, int]]:
    cfg, seed, trial_index, baselines = job
    trace = run_trial(cfg, seed, trial_index, baselines=baselines)
    out = {"stt": _squared_errors(trace.estimates, trace.truth)}
    if baselines:
        out["ckf"] = _squared_errors(trace.ckf, trace.truth)
        out["plkf"] = _squared_errors(trace.plkf, trace.truth)
    return out


def _run_trials(cfg: ScenarioConfig, trials: int, seed: int, baselines: bool, workers: int):
    jobs = [(cfg, seed, t, baselines) for t in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order
            return list(pool.map(_trial_errors, jobs))
    return [_trial_errors(job) for job in jobs]


def steady_state_window(horizon: int, burn_in_fraction: float) -> Optional[Tuple[int, int]]:
    if horizon == 0:
        return None
    start = max(1, math.ceil(burn_in_fraction * horizon))
    return min(start, horizon), horizon


def rmse_report(
    name: str,
    pos_sq: np.ndarray,
    vel_sq: np.ndarray,
    count: int,
    cfg: ScenarioConfig,
    trials: int,
    seed: int,
    burn_in_fraction: float,
) -> RmseReport:
    pos = np.sqrt(pos_sq / count)
    vel = np.sqrt(vel_sq / count)
    steady = None
    window = steady_state_window(cfg.horizon, burn_in_fraction)
    if window is not None:
        lo, hi = window
        steady = SteadyStateStats(
            start_step=lo,
            end_step=hi,
            position_mean=float(pos[lo - 1:hi].mean()),
            position_max=float(pos[lo - 1:hi].max()),
            velocity_mean=float(vel[lo - 1:hi].mean()),
            velocity_max=float(vel[lo - 1:hi].max()),
        )
    return RmseReport(
        estimator=name,
        trials=trials,
        seed=seed,
        dt=cfg.dt,
        steps=list(range(1, cfg.horizon + 1)),
        position_rmse=pos.tolist(),
        velocity_rmse=vel.tolist(),
        steady_state=steady,
    )


def _aggregate(cfg, results, trials, seed, burn_in_fraction) -> Dict[str, RmseReport]:
    reports = {}
    for name in results[0]:
        pos = np.zeros(cfg.horizon)
        vel = np.zeros(cfg.horizon)
        count = 0
        # fixed trial order keeps the sums bitwise reproducible
        for result in results:
            p, v, c = result[name]
            pos += p
            vel += v
            count += c
        reports[name] = rmse_report(name, pos, vel, count, cfg, trials, seed, burn_in_fraction)
    return reports


def monte_carlo(
    cfg: ScenarioConfig,
    trials: int,
    seed: int,
    workers: int = 1,
    burn_in_fraction: float = settings.burn_in_fraction,
) -> RmseReport:
    if trials < 1:
        raise ConfigurationException("trials must be >= 1")
    logger.info("Monte Carlo: %d trials, n=%d, horizon=%d, seed=%d", trials, cfg.n, cfg.horizon, seed)
    results = _run_trials(cfg, trials, seed, baselines=False, workers=workers)
    report = _aggregate(cfg, results, trials, seed, burn_in_fraction)["stt"]
    if report.steady_state is not None:
        logger.info("Steady-state position RMSE %.4f m", report.steady_state.position_mean)
    return report


def compare(
    cfg: ScenarioConfig,
    trials: int,
    seed: int,
    workers: int = 1,
    burn_in_fraction: float = settings.burn_in_fraction,
) -> CompareReport:
    """STT, CKF and PLKF on the same noise realisations."""
    logger.info("Comparing %s over %d trials (seed=%d)", ", ".join(ESTIMATORS), trials, seed)
    results = _run_trials(cfg, trials, seed, baselines=True, workers=workers)
    reports = _aggregate(cfg, results, trials, seed, burn_in_fraction)
    for name, report in reports.items():
        if report.steady_state is not None:
            logger.info("%s steady-state position RMSE %.4f m", name, report.steady_state.position_mean)
    return CompareReport(trials=trials, seed=seed, reports=reports)


def with_noise(cfg: ScenarioConfig, parameter: str, sigma: float) -> ScenarioConfig:
    if parameter not in ("bearing_sigma", "position_sigma"):
        raise ConfigurationException(f"Cannot sweep {parameter}")
    noise = cfg.noise.model_copy(update={parameter: sigma})
    return cfg.model_copy(update={"noise": noise})


def sweep_noise(
    cfg: ScenarioConfig,
    sigmas: Sequence[float],
    trials: int,
    seed: int,
    parameter: str = "bearing_sigma",
    workers: int = 1,
    burn_in_fraction: float = settings.burn_in_fraction,
) -> SweepReport:
    points = []
    for sigma in sigmas:
        # same seed at every point: identical draws, only their scale changes
        report = monte_carlo(with_noise(cfg, parameter, sigma), trials, seed, workers, burn_in_fraction)
        if report.steady_state is None:
            raise ConfigurationException("Noise sweep needs a positive horizon")
        points.append(SweepPoint(sigma=sigma, steady_state=report.steady_state))

    values = [p.steady_state.position_mean for p in points]
    rho = None
    if len(points) >= 2 and np.ptp(values) > 0:
        rho = float(stats.spearmanr(list(sigmas), values)[0])
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    logger.info("Noise sweep over %s: spearman=%s monotone=%s", parameter, rho, monotone)
    return SweepReport(parameter=parameter, trials=trials, seed=seed, points=points,
                       spearman_rho=rho, monotone=monotone)


class HarnessService:
    """Experiment runner bound to one set of runtime settings."""

    def __init__(self, runtime: Settings = settings):
        self.runtime = runtime

    def run_trial(self, cfg: ScenarioConfig, seed: int, trial_index: int = 0) -> TrialTrace:
        return run_trial(cfg, seed, trial_index)

    def monte_carlo(self, cfg: ScenarioConfig, trials: int, seed: int) -> RmseReport:
        return monte_carlo(cfg, trials, seed, self.runtime.workers, self.runtime.burn_in_fraction)

    def compare(self, cfg: ScenarioConfig, trials: int, seed: int) -> CompareReport:
        return compare(cfg, trials, seed, self.runtime.workers, self.runtime.burn_in_fraction)

    def sweep_noise(
        self,
        cfg: ScenarioConfig,
        trials: int,
        seed: int,
        parameter: str = "bearing_sigma",
        sigmas: Optional[Sequence[float]] = None,
    ) -> SweepReport:
        if not sigmas:
            sigmas = self.runtime.bearing_sigmas if parameter == "bearing_sigma" else self.runtime.position_sigmas
        return sweep_noise(cfg, sigmas, trials, seed, parameter, self.runtime.workers, self.runtime.burn_in_fraction)
