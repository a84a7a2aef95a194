import io
import json

import numpy as np
import pytest

from nbbounds import (
    DomainError,
    EpiScenario,
    NB2Params,
    Region,
    RngHandle,
    epi_control_limits,
    load_counts,
    load_scenario,
    monitor_step,
    reference_scenario,
    run_epi_validation,
    sample_nb2,
    start_monitoring,
    write_history,
)

SEED = 42


@pytest.fixture(scope="module")
def scenario():
    return reference_scenario()


class TestScenario:
    def test_cumulative_moments(self, scenario):
        assert scenario.cumulative_mean(0) == pytest.approx(12 * 210)
        assert scenario.cumulative_variance(0) == pytest.approx(12 * (210 + 0.35 * 210**2))
        assert scenario.total_expected() == pytest.approx(20_400.0)

    def test_tweedie_variance_exact(self, scenario):
        assert scenario.tweedie_variance() == pytest.approx(2_028_900.0, rel=1e-12)

    def test_default_region_ids(self, scenario):
        assert [r.id for r in scenario.regions] == [f"region_{i}" for i in range(1, 6)]

    def test_rejects_empty_or_invalid(self):
        with pytest.raises(DomainError):
            EpiScenario([], 12)
        with pytest.raises(DomainError):
            EpiScenario([Region(210, 0.35)], 0)
        with pytest.raises(DomainError):
            Region(-1.0, 0.2)


class TestControlLimits:
    def test_reference_limits(self, scenario):
        limits = dict(epi_control_limits(scenario, [0.05, 0.01]))
        assert limits[0.05] == pytest.approx(6370.0, abs=1.0)
        assert limits[0.01] == pytest.approx(14_244.0, abs=1.0)

    def test_single_poisson_region_limit(self):
        scenario = EpiScenario([Region(100.0, 0.0)], weeks=1)
        ((_, lam),) = epi_control_limits(scenario, [1 - 1e-9])
        assert lam == pytest.approx(10.0, rel=1e-6)


class TestMonitoring:
    def test_zero_deviation_never_alarms(self):
        mus = [210.0, 340.0]
        state = start_monitoring(limit=100.0, horizon=4)
        for _ in range(4):
            state = monitor_step(state, mus, mus)
        assert state.cumulative_deviation == 0.0
        assert not state.alarm
        assert not state.any_alarm()
        assert len(state.history) == state.period_index == 4

    def test_boundary_is_inclusive(self):
        state = start_monitoring(limit=50.0, horizon=2)
        state = monitor_step(state, [150.0], [100.0])
        assert state.cumulative_deviation == 50.0
        assert state.alarm

    def test_transition_is_pure(self):
        initial = start_monitoring(limit=50.0, horizon=2)
        monitor_step(initial, [150.0], [100.0])
        assert initial.period_index == 0
        assert initial.history == ()

    def test_length_mismatch_rejected(self):
        state = start_monitoring(limit=50.0, horizon=2)
        with pytest.raises(DomainError):
            monitor_step(state, [1.0, 2.0], [1.0])

    def test_horizon_exceeded(self):
        state = start_monitoring(limit=50.0, horizon=1)
        state = monitor_step(state, [100.0], [100.0])
        with pytest.raises(DomainError, match="horizon-exceeded"):
            monitor_step(state, [100.0], [100.0])

    def test_replay_is_identical(self, scenario):
        gen = RngHandle(SEED, 0).generator()
        counts = [
            [sample_nb2(NB2Params(r.weekly_mu, r.kappa), gen) for r in scenario.regions]
            for _ in range(12)
        ]
        mus = [r.weekly_mu for r in scenario.regions]

        def replay():
            state = start_monitoring(limit=6370.0, horizon=12)
            for row in counts:
                state = monitor_step(state, row, mus)
            return state.history

        assert replay() == replay()

    def test_alarm_monotone_in_counts(self):
        # with S_t >= 0 beforehand, adding counts weakly increases |S_t|
        mus = [100.0]
        state = start_monitoring(limit=1000.0, horizon=2)
        state = monitor_step(state, [150.0], mus)
        bumped = monitor_step(state, [170.0], mus)
        base = monitor_step(state, [160.0], mus)
        assert abs(bumped.cumulative_deviation) >= abs(base.cumulative_deviation)

    def test_outbreak_power_reported(self, scenario, capsys):
        # +50% on region 4 from week 6; detection rate is reported, not
        # asserted, since the 90% figure is a target rather than a claim
        mus = np.array([r.weekly_mu for r in scenario.regions])
        limit = dict(epi_control_limits(scenario, [0.05]))[0.05]
        detections = 0
        runs = 1000
        for rep in range(runs):
            gen = RngHandle(SEED, rep).generator()
            state = start_monitoring(limit, scenario.weeks)
            for week in range(scenario.weeks):
                shift = np.ones(len(mus))
                if week >= 5:
                    shift[3] = 1.5
                counts = [
                    sample_nb2(NB2Params(r.weekly_mu * shift[j], r.kappa), gen)
                    for j, r in enumerate(scenario.regions)
                ]
                state = monitor_step(state, counts, mus)
                if state.alarm:
                    detections += 1
                    break
        rate = detections / runs
        print(f"outbreak detection rate (+50% region 4 from week 6): {rate:.3f}")
        assert 0.0 < rate <= 1.0


class TestEpiValidation:
    def test_cumulative_parameter_consistency(self):
        # summing `weeks` weekly draws matches the cumulative moments
        mu, kappa, weeks = 340.0, 0.25, 12
        gen = RngHandle(SEED, 1).generator()
        draws = sample_nb2(NB2Params(mu, kappa), gen, size=(10**5) * weeks)
        sums = draws.reshape(10**5, weeks).sum(axis=1)
        target_mean = weeks * mu
        target_var = weeks * (mu + kappa * mu**2)
        se = np.sqrt(target_var / 10**5)
        assert abs(sums.mean() - target_mean) <= 3 * se
        assert sums.var(ddof=1) == pytest.approx(target_var, rel=0.05)

    def test_reference_p95_and_efficiency(self, scenario):
        by_mode = {
            mode: run_epi_validation(scenario, 5000, 0.05, SEED, mode=mode)
            for mode in ("region-prefix", "time-prefix")
        }
        matching = [
            mode
            for mode, s in by_mode.items()
            if abs(s.p95 - 3018.0) <= 0.05 * 3018.0 and abs(s.efficiency - 0.47) <= 0.03
        ]
        assert matching, {m: s.p95 for m, s in by_mode.items()}
        for s in by_mode.values():
            assert s.exceedance_rate <= 0.05

    def test_unknown_mode_rejected(self, scenario):
        with pytest.raises(DomainError):
            run_epi_validation(scenario, 10, 0.05, SEED, mode="zigzag")


class TestFileFormats:
    def test_scenario_round_trip(self, tmp_path):
        doc = {
            "regions": [
                {"id": "north", "weekly_mu": 210, "kappa": 0.35},
                {"weekly_mu": 340, "kappa": 0.25},
            ],
            "weeks": 12,
            "alpha_levels": [0.05, 0.01],
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc))
        scenario, alphas = load_scenario(str(path))
        assert [r.id for r in scenario.regions] == ["north", "region_2"]
        assert scenario.weeks == 12
        assert alphas == [0.05, 0.01]

    def test_malformed_scenario_rejected(self):
        with pytest.raises(DomainError):
            load_scenario(io.StringIO('{"regions": [{"weekly_mu": 5}], "weeks": 2}'))

    def test_counts_parsing_respects_header_order(self):
        scenario = EpiScenario([Region(1.0, 0.1, "a"), Region(2.0, 0.1, "b")], weeks=2)
        counts = load_counts(io.StringIO("b,a\n20,10\n21,11\n"), scenario)
        np.testing.assert_allclose(counts, [[10, 20], [11, 21]])

    def test_malformed_row_names_line(self):
        scenario = EpiScenario([Region(1.0, 0.1, "a")], weeks=3)
        with pytest.raises(DomainError, match="line 3"):
            load_counts(io.StringIO("a\n1\nnot-a-number\n"), scenario)

    def test_missing_region_id_rejected(self):
        scenario = EpiScenario([Region(1.0, 0.1, "a"), Region(1.0, 0.1, "b")], weeks=2)
        with pytest.raises(DomainError, match="missing region ids"):
            load_counts(io.StringIO("a\n1\n"), scenario)

    def test_history_format(self):
        state = start_monitoring(limit=50.0, horizon=2)
        state = monitor_step(state, [120.0], [100.0])
        state = monitor_step(state, [140.0], [100.0])
        sink = io.StringIO()
        write_history(state, sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "period,S_t,lambda_alpha,alarm"
        assert lines[1] == "1,20.0,50.0,false"
        assert lines[2] == "2,60.0,50.0,true"
