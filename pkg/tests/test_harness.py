import time

import numpy as np
import pytest

from stt.core.config import Settings
from stt.core.exceptions import ConfigurationException
from stt.main import ordering_holds
from stt.schemas.report import CompareReport, RmseReport, SteadyStateStats
from stt.schemas.scenario import ScenarioConfig
from stt.services.harness import (
    HarnessService,
    compare,
    monte_carlo,
    run_trial,
    simulate,
    steady_state_window,
    sweep_noise,
    with_noise,
)
from stt.utils.seeding import trial_rng

SMALL = ScenarioConfig(n=5, horizon=40, graph={"k": 2})


def test_zero_horizon_gives_empty_outputs():
    cfg = ScenarioConfig(horizon=0)
    trace = run_trial(cfg, seed=1)
    assert trace.estimates.shape == (0, 10, 6)
    assert trace.messages.shape == (0, 10, 27)
    report = monte_carlo(cfg, trials=2, seed=1)
    assert report.steps == []
    assert report.position_rmse == []
    assert report.steady_state is None


def test_trials_are_reproducible():
    a = run_trial(SMALL, seed=42, trial_index=3, baselines=True)
    b = run_trial(SMALL, seed=42, trial_index=3, baselines=True)
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.messages, b.messages)
    assert np.array_equal(a.ckf, b.ckf)
    assert np.array_equal(a.plkf, b.plkf)
    c = run_trial(SMALL, seed=42, trial_index=4)
    assert not np.array_equal(a.estimates, c.estimates)


def test_baselines_do_not_change_the_draws():
    plain = run_trial(SMALL, seed=8)
    with_baselines = run_trial(SMALL, seed=8, baselines=True)
    assert np.array_equal(plain.estimates, with_baselines.estimates)


def test_dynamic_graph_with_drops_stays_finite():
    cfg = ScenarioConfig(n=6, horizon=60, graph={"k": 3, "static": False, "drop_probability": 0.5})
    assert run_trial(cfg, seed=2).is_finite


def test_ucv_and_direct_corrections_agree():
    a = simulate(SMALL, trial_rng(6, 0)).trace
    b = simulate(SMALL, trial_rng(6, 0), method="ucv").trace
    np.testing.assert_allclose(a.estimates, b.estimates, rtol=1e-6, atol=1e-6)


def test_single_trial_rmse_matches_trace():
    report = monte_carlo(SMALL, trials=1, seed=13)
    trace = run_trial(SMALL, seed=13)
    expected_pos = np.sqrt(np.mean(trace.position_errors ** 2, axis=1))
    expected_vel = np.sqrt(np.mean(trace.velocity_errors ** 2, axis=1))
    np.testing.assert_allclose(report.position_rmse, expected_pos, rtol=1e-12)
    np.testing.assert_allclose(report.velocity_rmse, expected_vel, rtol=1e-12)
    assert report.steps == list(range(1, 41))
    assert report.steady_state.start_step == 8
    assert report.steady_state.position_mean == pytest.approx(expected_pos[7:].mean())


def test_parallel_workers_match_serial():
    serial = monte_carlo(SMALL, trials=3, seed=5)
    parallel = monte_carlo(SMALL, trials=3, seed=5, workers=2)
    assert serial.position_rmse == parallel.position_rmse


def test_monte_carlo_needs_a_trial():
    with pytest.raises(ConfigurationException):
        monte_carlo(SMALL, trials=0, seed=1)


@pytest.mark.parametrize("horizon,fraction,expected", [
    (1000, 0.2, (200, 1000)),
    (3, 0.2, (1, 3)),
    (1, 0.5, (1, 1)),
    (0, 0.2, None),
])
def test_steady_state_window(horizon, fraction, expected):
    assert steady_state_window(horizon, fraction) == expected


def test_compare_ranks_the_single_observer_filter_last():
    cfg = ScenarioConfig(horizon=300)
    report = compare(cfg, trials=4, seed=11)
    assert set(report.reports) == {"stt", "ckf", "plkf"}
    stt = report.reports["stt"].steady_state
    ckf = report.reports["ckf"].steady_state
    plkf = report.reports["plkf"].steady_state
    assert stt.position_mean < plkf.position_mean
    assert ckf.position_mean < plkf.position_mean


def test_compare_on_the_circle_scenario_meets_the_ordering_rule():
    report = compare(ScenarioConfig(), trials=10, seed=1)
    assert ordering_holds(report)


def test_bearing_sweep_is_monotone():
    cfg = ScenarioConfig(n=6, horizon=150, trajectory={"kind": "square"}, estimator={"sigma_nu": 1.0})
    report = sweep_noise(cfg, [0.01, 0.05, 0.1, 0.3], trials=4, seed=3)
    assert [p.sigma for p in report.points] == [0.01, 0.05, 0.1, 0.3]
    assert report.monotone
    assert report.spearman_rho > 0.9


def test_position_sweep_report():
    cfg = ScenarioConfig(n=4, horizon=30, graph={"k": 2})
    report = sweep_noise(cfg, [0.0, 0.5], trials=2, seed=3, parameter="position_sigma")
    assert report.parameter == "position_sigma"
    assert len(report.points) == 2


def test_with_noise_rejects_unknown_parameter():
    with pytest.raises(ConfigurationException):
        with_noise(SMALL, "range_sigma", 0.1)
    assert with_noise(SMALL, "position_sigma", 0.3).noise.position_sigma == 0.3


def _report(name, pos, vel):
    steady = SteadyStateStats(start_step=1, end_step=1, position_mean=pos, position_max=pos,
                              velocity_mean=vel, velocity_max=vel)
    return RmseReport(estimator=name, trials=1, seed=0, dt=0.1, steps=[1], position_rmse=[pos],
                      velocity_rmse=[vel], steady_state=steady)


@pytest.mark.parametrize("stt,ckf,plkf,expected", [
    ((1.0, 0.5), (0.8, 0.4), (5.0, 2.0), True),
    ((2.0, 0.5), (0.8, 0.4), (5.0, 2.0), False),
    ((1.0, 0.5), (0.8, 0.4), (0.9, 2.0), False),
    ((1.0, 0.5), (0.5, 0.25), (5.0, 2.0), True),
])
def test_ordering_holds(stt, ckf, plkf, expected):
    report = CompareReport(trials=1, seed=0, reports={
        "stt": _report("stt", *stt), "ckf": _report("ckf", *ckf), "plkf": _report("plkf", *plkf),
    })
    assert ordering_holds(report) is expected


@pytest.mark.parametrize("cfg", [
    SMALL,
    ScenarioConfig(n=6, horizon=60, graph={"k": 3, "static": False, "drop_probability": 0.3}),
])
def test_network_path_matches_per_observer_path(cfg):
    fast = simulate(cfg, trial_rng(4, 0), baselines=True)
    slow = simulate(cfg, trial_rng(4, 0), baselines=True, record_history=True)
    assert fast.observers == []
    assert len(slow.observers) == cfg.n
    np.testing.assert_allclose(fast.trace.estimates, slow.trace.estimates, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(fast.trace.messages, slow.trace.messages, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(fast.final.MHat, slow.final.MHat, rtol=1e-8, atol=1e-12)
    assert np.array_equal(fast.trace.ckf, slow.trace.ckf)
    assert np.array_equal(fast.trace.plkf, slow.trace.plkf)
    assert fast.final.step == slow.final.step == cfg.horizon


def test_circle_trial_runs_within_a_second():
    cfg = ScenarioConfig()
    assert cfg.horizon * cfg.dt == pytest.approx(100.0)
    run_trial(ScenarioConfig(horizon=5), seed=1)
    start = time.perf_counter()
    trace = run_trial(cfg, seed=1)
    elapsed = time.perf_counter() - start
    assert trace.is_finite
    assert elapsed < 1.0, f"one trial took {elapsed:.2f} s"


def test_harness_service_applies_runtime_settings():
    service = HarnessService(Settings(burn_in_fraction=0.5))
    report = service.monte_carlo(SMALL, trials=1, seed=13)
    assert report.steady_state.start_step == 20
    assert report.position_rmse == monte_carlo(SMALL, trials=1, seed=13).position_rmse
    sweep = service.sweep_noise(ScenarioConfig(n=4, horizon=20, graph={"k": 2}), trials=1, seed=2,
                                parameter="position_sigma")
    assert [p.sigma for p in sweep.points] == list(Settings().position_sigmas)
