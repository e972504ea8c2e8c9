# stt/services/verification.py
import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from stt.core.config import DECAY_BURN_IN, DECAY_SLACK
from stt.core.exceptions import ConfigurationException
from stt.models.geometry import Bearing
from stt.schemas.params import AngleCondition, SttParams
from stt.schemas.report import CheckResult, VerificationReport
from stt.schemas.scenario import ScenarioConfig
from stt.services import batch, theory
from stt.services.geometry import matrix_inverse_identity_check, transition
from stt.services.harness import simulate
from stt.services.theory import random_unit
from stt.utils.seeding import trial_rng

logger = logging.getLogger(__name__)

TUNED_PARAMS = SttParams()
THETA0 = math.radians(30.0)


def check_identity(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    pairs = [(np.eye(6), np.eye(6)), (np.eye(6), 2 * np.eye(6))]
    pairs += [(theory.random_spd(rng), theory.random_spd(rng)) for _ in range(20)]
    agree = sum(matrix_inverse_identity_check(A, C) for A, C in pairs)
    return [CheckResult(
        name="identity", inputs={"pairs": len(pairs)},
        lhs=float(agree), rhs=float(len(pairs)), passed=agree == len(pairs),
    )]


def check_lemma1(seed: int) -> List[CheckResult]:
    model = transition(0.1)
    result = theory.expected_error_check(np.random.default_rng(seed), TUNED_PARAMS, model)
    worst = float(result.z_scores.max())
    return [CheckResult(
        name="lemma1", inputs={"draws": result.draws, "position_sigma": 0.5},
        lhs=worst, rhs=3.0, passed=result.within,
        detail="largest |sample mean - expected| in standard errors",
    )]


def check_lemma2(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    cond = AngleCondition(theta0=THETA0, alpha0=0.25)
    worst = 0.0
    for dt in (0.1, 0.5, 1.0):
        model = transition(dt)
        for _ in range(10):
            history = theory.random_feasible_history(rng, int(rng.integers(1, 31)), model, TUNED_PARAMS, cond)
            worst = max(worst, theory.lemma2_residual(history))
    return [CheckResult(name="lemma2", inputs={"histories": 30}, lhs=worst, rhs=1e-10, passed=worst <= 1e-10)]


def check_lemma3(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        gi = random_unit(rng)
        theta = rng.uniform(0.0, math.pi)
        axis = np.cross(gi, random_unit(rng))
        axis /= np.linalg.norm(axis)
        gj = math.cos(theta) * gi + math.sin(theta) * np.cross(axis, gi)
        gj /= np.linalg.norm(gj)
        numeric = theory.sigma_min_projection_pair(Bearing(gi), Bearing(gj))
        worst = max(worst, abs(numeric - theory.projection_pair_closed_form(Bearing(gi), Bearing(gj))))
    return [CheckResult(name="lemma3", inputs={"pairs": 1000}, lhs=worst, rhs=1e-10, passed=worst <= 1e-10)]


def check_lemma4(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    cond = AngleCondition(theta0=THETA0, alpha0=0.25)
    failures = 0
    worst_margin = math.inf
    for _ in range(10):
        count = int(rng.integers(2, 5))
        bearings = theory.separated_bearings(rng, count, cond)
        result = theory.pbar_lower_bound_check(bearings, [1.0 / count] * count, cond)
        failures += not result.holds
        worst_margin = min(worst_margin, result.lhs - result.rhs)
    g = random_unit(rng)
    parallel = theory.pbar_lower_bound_check([Bearing(g), Bearing(-g)], [0.5, 0.5], cond)
    return [
        CheckResult(name="lemma4", inputs={"configs": 10, "theta0": THETA0, "alpha0": 0.25},
                    lhs=worst_margin, rhs=0.0, passed=failures == 0,
                    detail="smallest sigma_min(Pbar) - alpha0 (1 - cos theta0)"),
        CheckResult(name="lemma4-parallel", lhs=parallel.lhs, rhs=parallel.rhs,
                    passed=not parallel.applicable, applicable=parallel.applicable,
                    detail="parallel bearings violate the angle hypothesis"),
    ]


def check_lemma5(seed: int) -> List[CheckResult]:
    dts = (0.01, 0.1, 0.5, 1.0, 2.0)
    worst = max(abs(theory.f_delta(dt) - theory.f_delta_eig(dt)) for dt in dts)
    at_one = abs(theory.f_delta(1.0) - (3.0 - math.sqrt(5.0)) / 2.0)
    return [CheckResult(name="lemma5", inputs={"dt": list(dts)}, lhs=max(worst, at_one), rhs=1e-12,
                        passed=worst <= 1e-12 and at_one <= 1e-12)]


def check_lemma6(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    cond = AngleCondition(theta0=THETA0, alpha0=0.25)
    sigma_nu = 1.0
    worst = math.inf
    for h in range(100):
        model = transition(float(rng.choice([0.1, 0.5, 1.0])))
        c = theory.c_lower_bound(TUNED_PARAMS, model, cond, sigma_nu)
        params = TUNED_PARAMS.model_copy(update={"c": c, "sigma_nu": sigma_nu})
        history = theory.random_feasible_history(rng, int(rng.integers(2, 31)), model, params, cond)
        worst = min(worst, theory.gram_min_singular(history))
    return [CheckResult(name="lemma6", inputs={"histories": 100, "theta0": THETA0, "alpha0": 0.25},
                        lhs=worst, rhs=1.0 - 1e-9, passed=worst >= 1.0 - 1e-9)]


def check_c_bound(seed: int) -> List[CheckResult]:
    """Where the tuned c sits relative to the sufficient bound. Informational."""
    model = transition(0.1)
    out = []
    for alpha0 in (0.25, 1.0 / 3.0):
        cond = AngleCondition(theta0=THETA0, alpha0=alpha0)
        bound = theory.c_lower_bound(TUNED_PARAMS, model, cond, 1.0)
        out.append(CheckResult(
            name="c-bound",
            inputs={"c": TUNED_PARAMS.c, "theta0": THETA0, "alpha0": alpha0, "sigma_nu": 1.0, "dt": 0.1},
            lhs=TUNED_PARAMS.c, rhs=bound, passed=True,
            detail="satisfied" if TUNED_PARAMS.c >= bound else "c below the sufficient bound (not asserted)",
        ))
    return out


def check_theorem1(seed: int) -> List[CheckResult]:
    traces = theory.decay_traces(trials=100, seed=seed, horizon=200)
    report = theory.decay_rate_check(traces, TUNED_PARAMS.gamma1, TUNED_PARAMS.gamma2)
    converged = report.final_position_error is not None and report.final_position_error < 1e-3
    return [
        CheckResult(name="theorem1", inputs={"trials": report.trials, "fit_steps": len(report.fit_steps),
                                              "max_ratio": report.max_ratio},
                    lhs=report.fitted_rate, rhs=report.bound, passed=report.holds,
                    detail="fitted rate and worst step ratio vs (1 + gamma2) / (1 + gamma1), slack 0.05"),
        CheckResult(name="theorem1-ratio", inputs={"burn_in": DECAY_BURN_IN},
                    lhs=report.max_ratio, rhs=report.bound + DECAY_SLACK,
                    passed=report.max_ratio is not None and report.max_ratio <= report.bound + DECAY_SLACK),
        CheckResult(name="theorem1-final", inputs={"step": 200},
                    lhs=report.final_position_error, rhs=1e-3, passed=converged),
    ]


def check_batch(seed: int) -> List[CheckResult]:
    """Recursion against the closed form for every observer of 20 recorded runs."""
    worst_x = 0.0
    worst_m = 0.0
    cfg = ScenarioConfig(n=4, horizon=50, graph={"k": 2, "static": False, "drop_probability": 0.1})
    for run in range(20):
        result = simulate(cfg, trial_rng(seed, run), record_history=True)
        for i, observer in enumerate(result.observers):
            history = observer.history
            err_x, _ = batch.recursion_errors(history, result.trace.estimates[:, i, :])
            worst_x = max(worst_x, err_x)
            worst_m = max(worst_m, float(np.linalg.norm(observer.state.MHat - batch.recursive_m(history))
                                         / np.linalg.norm(observer.state.MHat)))
    return [
        CheckResult(name="batch", inputs={"runs": 20, "n": 4, "k": 50}, lhs=worst_x, rhs=1e-8,
                    passed=worst_x <= 1e-8),
        CheckResult(name="batch-m", inputs={"runs": 20, "k": 50}, lhs=worst_m, rhs=1e-8,
                    passed=worst_m <= 1e-8),
    ]


Check = Callable[[int], List[CheckResult]]

CHECKS: Dict[str, Check] = {
    "identity": check_identity,
    "lemma1": check_lemma1,
    "lemma2": check_lemma2,
    "lemma3": check_lemma3,
    "lemma4": check_lemma4,
    "lemma5": check_lemma5,
    "lemma6": check_lemma6,
    "c-bound": check_c_bound,
    "theorem1": check_theorem1,
    "batch": check_batch,
}


def resolve(names: Sequence[str], checks: Mapping[str, Check] = CHECKS) -> List[str]:
    if not names or "all" in names:
        return list(checks)
    unknown = [name for name in names if name not in checks]
    if unknown:
        raise ConfigurationException(
            f"Unknown check name(s): {', '.join(unknown)}; choose from {', '.join(checks)} or all"
        )
    return list(dict.fromkeys(names))


def verify(names: Sequence[str], seed: int = 0, checks: Mapping[str, Check] = CHECKS) -> VerificationReport:
    results_all = []
    for name in resolve(names, checks):
        logger.info("Running check %s", name)
        results = checks[name](seed)
        for result in results:
            level = logging.INFO if result.passed else logging.WARNING
            logger.log(level, "%s: lhs=%s rhs=%s passed=%s", result.name, result.lhs, result.rhs, result.passed)
        results_all.extend(results)
    return VerificationReport(checks=results_all)


class VerificationService:
    def __init__(self, checks: Optional[Mapping[str, Check]] = None):
        self.checks = CHECKS if checks is None else checks

    def available(self) -> List[str]:
        return list(self.checks)

    def verify(self, names: Sequence[str], seed: int = 0) -> VerificationReport:
        return verify(names, seed, self.checks)
