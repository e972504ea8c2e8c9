# stt/services/batch.py
"""
Closed-form evaluation of the forgetting-factor least-squares problem over a recorded
history. Used as the reference the recursion is checked against.

The recursion starts from an arbitrary (x0, M0). That start enters the batch problem
as one extra term, weighted like a step at t = 0:

    lambda_0 || x0 - A^{-k} x ||^2_{M0^{-1}},   lambda_0 = gamma2^k / a^(k+1)

where a = |A| (1 + gamma1). With it the batch minimiser equals the recursive estimate
from the first step for any positive-definite M0. `include_prior=False` drops it.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from stt.core.exceptions import ConfigurationException, ObservabilityException
from stt.models.history import BatchTerms, HistoryRecord
from stt.services.estimator import forgetting_factor
from stt.utils.linalg import relative_error, sigma_min, spd_inverse, symmetrize

logger = logging.getLogger(__name__)

I6 = np.eye(6)


def _resolve_k(history: HistoryRecord, k: Optional[int]) -> int:
    k = history.k if k is None else k
    if k < 1 or k > history.k:
        raise ConfigurationException(f"History holds {history.k} steps; cannot evaluate k={k}")
    return k


def local_terms(history: HistoryRecord, t: int) -> Tuple[np.ndarray, np.ndarray]:
    """Un-pulled-back y and S of step t (the bracketed sums)."""
    step = history.steps[t - 1]
    params = history.params
    r = params.r_scalar
    y = np.zeros(6)
    S = I6.copy()
    for j, msg in sorted(step.messages().items()):
        alpha = step.weights.alpha[j]
        beta = step.weights.beta[j]
        y += params.c * alpha * r * (msg.H.T @ msg.z) + beta * msg.xPred
        S += params.c * alpha * r * (msg.H.T @ msg.H)
    return y, S


def build_terms(history: HistoryRecord, t: int, k: int) -> BatchTerms:
    if not 1 <= t <= k <= history.k:
        raise ConfigurationException(f"Need 1 <= t <= k <= {history.k}, got t={t}, k={k}")
    pull = history.model.power(t - k)
    y, S = local_terms(history, t)
    return BatchTerms(
        yT=pull.T @ y,
        sT=pull.T @ S @ pull,
        lam=forgetting_factor(history.params, history.model.normA, k - t),
    )


def prior_terms(history: HistoryRecord, k: int) -> BatchTerms:
    params = history.params
    a = history.model.normA * (1.0 + params.gamma1)
    pull = history.model.power(-k)
    omega0 = spd_inverse(history.M0, "M0")
    return BatchTerms(
        yT=pull.T @ omega0 @ history.x0,
        sT=pull.T @ omega0 @ pull,
        lam=params.gamma2 ** k / a ** (k + 1),
    )


def all_terms(history: HistoryRecord, k: int, include_prior: bool = True) -> List[BatchTerms]:
    terms = [build_terms(history, t, k) for t in range(1, k + 1)]
    if include_prior:
        terms.append(prior_terms(history, k))
    return terms


def normal_equations(history: HistoryRecord, k: Optional[int] = None, include_prior: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """(sum lambda S, sum lambda y) at step k."""
    k = _resolve_k(history, k)
    G = np.zeros((6, 6))
    b = np.zeros(6)
    for term in all_terms(history, k, include_prior):
        G += term.lam * term.sT
        b += term.lam * term.yT
    return symmetrize(G), b


def batch_solve(history: HistoryRecord, k: Optional[int] = None, include_prior: bool = True) -> np.ndarray:
    k = _resolve_k(history, k)
    G, b = normal_equations(history, k, include_prior)
    smin = sigma_min(G)
    if not np.isfinite(smin) or smin <= 1e-12 * max(np.linalg.norm(G, 2), 1e-300):
        raise ObservabilityException(smin, k)
    return np.linalg.solve(G, b)


def objective(history: HistoryRecord, xCandidate: np.ndarray, k: Optional[int] = None, include_prior: bool = True) -> float:
    k = _resolve_k(history, k)
    params = history.params
    r = params.r_scalar
    x = np.asarray(xCandidate, dtype=float)
    total = 0.0
    for t in range(1, k + 1):
        step = history.steps[t - 1]
        xt = history.model.power(t - k) @ x
        lam = forgetting_factor(params, history.model.normA, k - t)
        meas = 0.0
        cons = 0.0
        for j, msg in step.messages().items():
            res = msg.z - msg.H @ xt
            meas += step.weights.alpha[j] * r * float(res @ res)
            diff = msg.xPred - xt
            cons += step.weights.beta[j] * float(diff @ diff)
        total += lam * (params.c * meas + cons)
    if include_prior:
        prior = prior_terms(history, k)
        d = history.x0 - history.model.power(-k) @ x
        total += prior.lam * float(d @ spd_inverse(history.M0, "M0") @ d)
    return total


def recursive_m(history: HistoryRecord, k: Optional[int] = None, include_prior: bool = True) -> np.ndarray:
    """lambda_k^(k) (sum lambda S)^{-1}: the batch-side definition of M at step k."""
    k = _resolve_k(history, k)
    G, _ = normal_equations(history, k, include_prior)
    return forgetting_factor(history.params, history.model.normA, 0) * spd_inverse(G, f"sum lambda S at k={k}")


def ybar_definition(history: HistoryRecord, k: Optional[int] = None, include_prior: bool = True) -> np.ndarray:
    k = _resolve_k(history, k)
    _, b = normal_equations(history, k, include_prior)
    return b / forgetting_factor(history.params, history.model.normA, 0)


def ybar_recursion(history: HistoryRecord, include_prior: bool = True) -> List[np.ndarray]:
    """ybar_k = (gamma2 / a) A^{-T} ybar_{k-1} + y_k^(k), for k = 1..K."""
    params = history.params
    a = history.model.normA * (1.0 + params.gamma1)
    if include_prior:
        ybar = spd_inverse(history.M0, "M0") @ history.x0
    else:
        ybar = np.zeros(6)
    out = []
    for t in range(1, history.k + 1):
        y_local, _ = local_terms(history, t)
        ybar = (params.gamma2 / a) * history.model.inverse.T @ ybar + y_local
        out.append(ybar)
    return out


def recursion_errors(history: HistoryRecord, estimates: Sequence[np.ndarray], Ms: Optional[Sequence[np.ndarray]] = None) -> Tuple[float, float]:
    """Largest relative mismatch between recursive (x, M) at each step and the batch values."""
    worst_x = 0.0
    worst_m = 0.0
    for k in range(1, history.k + 1):
        worst_x = max(worst_x, relative_error(estimates[k - 1], batch_solve(history, k)))
        if Ms is not None:
            worst_m = max(worst_m, relative_error(Ms[k - 1], recursive_m(history, k)))
    logger.debug("Recursion vs batch over %d steps: x %.3e, M %.3e", history.k, worst_x, worst_m)
    return worst_x, worst_m
