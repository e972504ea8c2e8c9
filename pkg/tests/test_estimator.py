import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stt.core.exceptions import ConfigurationException
from stt.models.estimator import EstimatorState, NeighborMessage, NetworkState, StepWeights
from stt.models.geometry import Bearing
from stt.schemas.params import SttParams
from stt.schemas.scenario import ScenarioConfig
from stt.services.estimator import (
    SttObserver,
    correct,
    forgetting_factor,
    innovate,
    network_step,
    predict,
    step,
    uniform_weight_matrix,
)
from stt.services.geometry import pseudo_linearize, transition, unit_bearing
from stt.services.harness import simulate
from stt.services.world import drop_links, knn_graph
from stt.utils.seeding import trial_rng


def _measurement(p, s):
    return pseudo_linearize(unit_bearing(np.asarray(p, float), np.asarray(s, float)), np.asarray(s, float))


def test_forgetting_factor_at_zero_lag(params, model):
    assert forgetting_factor(params, model.normA, 0) == pytest.approx(1.0 / (model.normA * (1 + params.gamma1)))


def test_forgetting_factor_tuned_values(params):
    lam = forgetting_factor(params, 1.05125, 1)
    assert lam == pytest.approx(6.1323 / (1.05125 * 8.1609) ** 2, rel=1e-12)
    assert lam == pytest.approx(0.0833, abs=1e-4)
    ratio = params.gamma2 / (1.05125 * (1 + params.gamma1))
    assert lam == pytest.approx(forgetting_factor(params, 1.05125, 0) * ratio, rel=1e-12)


def test_forgetting_factor_ratio_with_equal_gammas():
    flat = SttParams.model_construct(c=1.0, gamma1=2.0, gamma2=2.0, sigma_nu=1.0)
    values = [forgetting_factor(flat, 1.0, lag) for lag in range(6)]
    for a, b in zip(values, values[1:]):
        assert b / a == pytest.approx(2.0 / 3.0)
        assert b < a


def test_forgetting_factor_is_non_increasing(params, model):
    values = [forgetting_factor(params, model.normA, lag) for lag in range(30)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_forgetting_factor_rejects_negative_lag(params, model):
    with pytest.raises(ConfigurationException):
        forgetting_factor(params, model.normA, -1)


def test_predict_keeps_static_position(params, model):
    state = EstimatorState(xHat=np.array([1.0, 2.0, 3.0, 0, 0, 0]), MHat=np.eye(6))
    xPred, _ = predict(state, model, params)
    np.testing.assert_allclose(xPred[:3], [1.0, 2.0, 3.0])


def test_predict_information_term(params, model):
    state = EstimatorState(xHat=np.zeros(6), MHat=np.eye(6))
    _, term = predict(state, model, params)
    expected = np.linalg.inv(model.A @ model.A.T) / ((1 + params.gamma1) * model.normA)
    np.testing.assert_allclose(term, expected, rtol=1e-12, atol=1e-14)


def test_innovate_with_consistent_measurement(params):
    xPred = np.array([5.0, -3.0, 12.0, 1.0, 0.0, 0.0])
    own = _measurement(xPred[:3], [0.0, 0.0, 0.0])
    eMeas, eCons, S = innovate(xPred, own, {}, StepWeights.uniform(0, []), params)
    np.testing.assert_allclose(eMeas, np.zeros(6), atol=1e-12)
    np.testing.assert_allclose(eCons, np.zeros(6))
    np.testing.assert_allclose(S, params.c * params.r_scalar * own.H.T @ own.H + np.eye(6), atol=1e-14)


def test_innovation_matrix_is_spd(params, rng):
    for _ in range(20):
        xPred = np.concatenate([rng.uniform(-20, 20, 3), rng.normal(size=3)])
        own = _measurement(rng.uniform(-20, 20, 3), rng.uniform(-20, 20, 3))
        msgs = {
            j: NeighborMessage(sender=j, xPred=rng.normal(size=6), z=m.z, H=m.H)
            for j, m in ((j, _measurement(rng.uniform(-20, 20, 3), rng.uniform(-20, 20, 3))) for j in (1, 2, 3))
        }
        _, _, S = innovate(xPred, own, msgs, StepWeights.uniform(0, msgs), params)
        np.testing.assert_allclose(S, S.T)
        assert np.linalg.eigvalsh(S)[0] >= 1.0 - 1e-12


def test_innovation_with_orthogonal_bearings(params):
    p = np.array([0.0, 0.0, 10.0])
    own = _measurement(p, [10.0, 0.0, 10.0])
    other = _measurement(p, [0.0, 10.0, 10.0])
    msgs = {1: NeighborMessage(sender=1, xPred=np.concatenate([p, np.zeros(3)]), z=other.z, H=other.H)}
    _, _, S = innovate(np.concatenate([p, np.zeros(3)]), own, msgs, StepWeights.uniform(0, [1]), params)
    block = (S - np.eye(6))[:3, :3] / (params.c * params.r_scalar * 0.5)
    assert np.linalg.svd(block, compute_uv=False)[-1] == pytest.approx(1.0, abs=1e-12)


def test_innovate_rejects_bad_weights(params):
    own = _measurement([0, 0, 10], [5, 0, 0])
    bad_sum = StepWeights(self_id=0, alpha={0: 0.7}, beta={0: 1.0})
    with pytest.raises(ConfigurationException):
        innovate(np.zeros(6), own, {}, bad_sum, params)
    msg = NeighborMessage(sender=4, xPred=np.zeros(6), z=own.z, H=own.H)
    with pytest.raises(ConfigurationException):
        innovate(np.zeros(6), own, {4: msg}, StepWeights.uniform(0, []), params)


def test_correct_without_innovation_is_prediction(params, model):
    state = EstimatorState(xHat=np.array([1.0, 1.0, 1.0, 0.5, 0.0, 0.0]), MHat=np.eye(6))
    xPred, term = predict(state, model, params)
    own = _measurement(xPred[:3], [9.0, 9.0, 0.0])
    _, _, S = innovate(xPred, own, {}, StepWeights.uniform(0, []), params)
    new = correct(xPred, term, np.zeros(6), np.zeros(6), S, params)
    np.testing.assert_allclose(new.xHat, xPred)
    assert np.linalg.eigvalsh(new.MHat)[-1] <= 1.0 + 1e-12


def test_ucv_correction_matches_direct(params, model, rng):
    for _ in range(10):
        B = rng.normal(size=(6, 6))
        state = EstimatorState(xHat=rng.normal(size=6), MHat=B @ B.T / 6 + 0.1 * np.eye(6))
        xPred, term = predict(state, model, params)
        own = _measurement(rng.uniform(-20, 20, 3), rng.uniform(-20, 20, 3))
        eMeas, eCons, S = innovate(xPred, own, {}, StepWeights.uniform(0, []), params)
        direct = correct(xPred, term, eMeas, eCons, S, params, method="direct")
        ucv = correct(xPred, term, eMeas, eCons, S, params, method="ucv")
        np.testing.assert_allclose(ucv.MHat, direct.MHat, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(ucv.xHat, direct.xHat, rtol=1e-8, atol=1e-8)


def test_correct_rejects_unknown_method(params):
    with pytest.raises(ConfigurationException):
        correct(np.zeros(6), np.eye(6), np.zeros(6), np.zeros(6), np.eye(6), params, method="qr")


def test_step_is_deterministic(params, model):
    state = EstimatorState(xHat=np.arange(6.0), MHat=np.eye(6))
    own = _measurement([3.0, 1.0, 8.0], [0.0, -2.0, 1.0])
    neighbor = _measurement([3.0, 1.0, 8.0], [7.0, 4.0, 0.0])
    msgs = {2: NeighborMessage(sender=2, xPred=np.ones(6), z=neighbor.z, H=neighbor.H)}
    w = StepWeights.uniform(0, [2])
    a, msg_a = step(state, model, params, own, msgs, w)
    b, msg_b = step(state, model, params, own, msgs, w)
    assert np.array_equal(a.xHat, b.xHat) and np.array_equal(a.MHat, b.MHat)
    assert np.array_equal(msg_a.xPred, model.A @ state.xHat)
    assert a.step == 1


def test_static_target_noiseless_convergence():
    cfg = ScenarioConfig(
        n=3,
        horizon=200,
        trajectory={"kind": "linear", "p0": (0.0, 0.0, 10.0), "v": (0.0, 0.0, 0.0)},
        noise={"bearing_sigma": 0.0, "position_sigma": 0.0},
        graph={"k": 2},
        estimator={"sigma_nu": 0.01},
        observer_positions=[(20.0, 0.0, 10.0), (0.0, 20.0, 10.0), (0.0, 0.0, -10.0)],
    )
    trace = simulate(cfg, trial_rng(1, 0)).trace
    assert trace.position_errors[-1].max() < 1e-3


def test_observer_must_broadcast_first(params, model):
    observer = SttObserver(0, np.zeros(6), np.eye(6), model, params)
    with pytest.raises(RuntimeError):
        observer.update({}, StepWeights.uniform(0, []))


def test_message_record_layout():
    msg = NeighborMessage(sender=3, xPred=np.arange(6.0), z=np.array([6.0, 7.0, 8.0]),
                          H=np.arange(9.0, 27.0).reshape(3, 6))
    record = msg.to_record()
    assert record == [float(v) for v in range(27)]
    back = NeighborMessage.from_record(3, record)
    assert np.array_equal(back.H, msg.H)
    with pytest.raises(ConfigurationException):
        NeighborMessage.from_record(3, record[:-1])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8),
    st.sets(st.integers(1, 7)),
)
def test_restricted_weights_still_sum_to_one(raw, received):
    ids = list(range(len(raw)))
    total = sum(raw)
    alpha = {j: w / total for j, w in zip(ids, raw)}
    drift = 1.0 - sum(alpha.values())
    alpha[0] += drift
    w = StepWeights(self_id=0, alpha=alpha, beta=dict(alpha))
    restricted = w.restrict(received).validate()
    assert set(restricted.alpha) == {0} | (received & set(ids))
    assert abs(sum(restricted.beta.values()) - 1.0) <= 1e-12


def test_uniform_weights_cover_self_and_neighbours():
    w = StepWeights.uniform(2, [5, 0, 7]).validate()
    assert w.neighbor_ids == [0, 5, 7]
    assert w.alpha == w.beta
    assert all(a == pytest.approx(0.25) for a in w.alpha.values())
    assert w.restrict([5]).neighbor_ids == [5]


def test_innovate_matches_term_by_term_sums(params, rng):
    xPred = np.concatenate([rng.uniform(-20, 20, 3), rng.normal(size=3)])
    own = _measurement(rng.uniform(-20, 20, 3), rng.uniform(-20, 20, 3))
    msgs = {}
    for j in (2, 5, 7):
        m = _measurement(rng.uniform(-20, 20, 3), rng.uniform(-20, 20, 3))
        msgs[j] = NeighborMessage(sender=j, xPred=rng.normal(size=6), z=m.z, H=m.H)
    alpha = {0: 0.4, 2: 0.1, 5: 0.3, 7: 0.2}
    beta = {0: 0.25, 2: 0.25, 5: 0.4, 7: 0.1}
    w = StepWeights(self_id=0, alpha=alpha, beta=beta)

    eMeas, eCons, S = innovate(xPred, own, msgs, w, params)

    r = params.r_scalar
    terms = [(0, own.z, own.H)] + [(j, m.z, m.H) for j, m in msgs.items()]
    expected_meas = params.c * sum(alpha[j] * r * H.T @ (z - H @ xPred) for j, z, H in terms)
    expected_cons = sum(beta[j] * (m.xPred - xPred) for j, m in msgs.items())
    expected_S = params.c * sum(alpha[j] * r * H.T @ H for j, _, H in terms) + np.eye(6)
    np.testing.assert_allclose(eMeas, expected_meas, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(eCons, expected_cons, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(S, expected_S, rtol=1e-12, atol=1e-12)


def test_uniform_weights_are_marked_checked():
    uniform = StepWeights.uniform(3, [1, 4])
    assert uniform.checked
    by_hand = StepWeights(self_id=3, alpha=dict(uniform.alpha), beta=dict(uniform.beta))
    assert not by_hand.checked
    assert by_hand == uniform


def test_uniform_weight_matrix_rows():
    positions = np.random.default_rng(9).uniform(-30, 30, size=(6, 3))
    graph = knn_graph(positions, 2)
    W = uniform_weight_matrix(graph)
    np.testing.assert_allclose(W.sum(axis=1), np.ones(6))
    for i in range(6):
        heard = [i] + graph.neighbors(i)
        expected = StepWeights.uniform(i, graph.neighbors(i)).alpha
        assert set(np.flatnonzero(W[i])) == set(heard)
        for j in heard:
            assert W[i, j] == expected[j]


def test_network_step_matches_per_observer_steps(params, model, rng):
    n = 5
    positions = rng.uniform(-30, 30, size=(n, 3))
    graph = drop_links(knn_graph(positions, 3), 0.3, rng)
    target = np.array([2.0, -1.0, 45.0])
    measurements = [_measurement(target, s) for s in positions]
    Ms = []
    for _ in range(n):
        B = rng.normal(size=(6, 6))
        Ms.append(B @ B.T / 6 + 0.1 * np.eye(6))
    network = NetworkState(xHat=np.hstack([positions, rng.normal(size=(n, 3))]), MHat=np.array(Ms), step=3)
    Z = np.array([m.z for m in measurements])
    Hs = np.array([m.H for m in measurements])

    new, xPred = network_step(network, model, params, Z, Hs, uniform_weight_matrix(graph))

    assert new.step == 4
    for i in range(n):
        msgs = {
            j: NeighborMessage(sender=j, xPred=model.A @ network.xHat[j], z=Z[j], H=Hs[j])
            for j in graph.neighbors(i)
        }
        expected, outgoing = step(network.observer(i), model, params, measurements[i], msgs,
                                  StepWeights.uniform(i, msgs))
        np.testing.assert_allclose(xPred[i], outgoing.xPred, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(new.MHat[i], expected.MHat, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(new.xHat[i], expected.xHat, rtol=1e-9, atol=1e-9)
