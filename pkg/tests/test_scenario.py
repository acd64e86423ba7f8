import json

import pytest

from leachsim.errors import ConfigError
from leachsim.metrics import RunReport
from leachsim.scenario import (
    ComparisonReport,
    Scenario,
    parse_config,
    run_scenario,
    verify_trends,
)
from leachsim.config import sim_config_from_dict


SMALL_SIM = {
    "node_count": 10,
    "area_width_m": 300.0,
    "area_height_m": 150.0,
    "sim_duration_s": 40.0,
}


class TestParseConfig:
    def test_minimal_config_gets_documented_defaults(self):
        scenario = parse_config('{"protocols": ["OFZ"], "seeds": [7]}')
        assert scenario.base.node_count == 50
        assert scenario.base.area_width_m == 1500.0
        assert scenario.base.area_height_m == 300.0
        assert scenario.protocols == ["OFZ"]
        assert scenario.seeds == [7]
        assert scenario.node_counts == [50]

    def test_defaults_fill_protocols_and_seeds(self):
        scenario = parse_config("{}")
        assert scenario.protocols == ["LEACH", "FZ", "OFZ"]
        assert scenario.seeds == list(range(1, 11))

    def test_zero_node_count_names_the_field(self):
        with pytest.raises(ConfigError) as err:
            parse_config('{"sim": {"node_count": 0}}')
        assert "node_count" in str(err.value)

    def test_unknown_key_cited(self):
        with pytest.raises(ConfigError) as err:
            parse_config('{"sim": {"nodez": 5}}')
        assert "nodez" in str(err.value)

    def test_unknown_top_level_key_cited(self):
        with pytest.raises(ConfigError) as err:
            parse_config('{"speeds": [1]}')
        assert "speeds" in str(err.value)

    def test_unknown_protocol_rejected(self):
        with pytest.raises(ConfigError):
            parse_config('{"protocols": ["AODV"]}')

    def test_malformed_json_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("{nope")

    def test_file_input(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"seeds": [3], "sim": SMALL_SIM}))
        scenario = parse_config(path)
        assert scenario.name == "s"
        assert scenario.base.node_count == 10

    def test_echo_contains_every_parameter(self):
        scenario = parse_config('{"seeds": [1]}')
        echo = scenario.echo()
        sim = echo["sim"]
        for key in ("area_width_m", "comm_range_m", "packet_size_bits",
                    "initial_energy_j", "mobility", "radio", "ema", "protocol_params"):
            assert key in sim
        assert sim["protocol_params"]["membership_threshold_gamma"] == 0.4


class TestRunScenario:
    def test_cardinality(self):
        scenario = parse_config(json.dumps(
            {"protocols": ["LEACH"], "seeds": [1, 2, 3], "sim": SMALL_SIM}))
        comparison = run_scenario(scenario)
        assert len(comparison.reports) == 3
        stats = comparison.aggregates()[("LEACH", 10)]
        assert stats["packets_sent"][0] > 0

    def test_node_count_sweep(self):
        scenario = parse_config(json.dumps(
            {"protocols": ["LEACH"], "seeds": [1], "node_counts": [6, 8, 10],
             "sim": SMALL_SIM}))
        comparison = run_scenario(scenario)
        assert len(comparison.reports) == 3
        assert {k[1] for k in comparison.reports} == {6, 8, 10}

    def test_identical_scenarios_identical_results(self):
        src = json.dumps({"protocols": ["FZ"], "seeds": [1, 2], "sim": SMALL_SIM})
        a = run_scenario(parse_config(src))
        b = run_scenario(parse_config(src))
        for key in a.reports:
            assert a.reports[key].to_json() == b.reports[key].to_json()

    def test_keep_traces(self):
        scenario = parse_config(json.dumps(
            {"protocols": ["OFZ"], "seeds": [1], "sim": SMALL_SIM}))
        comparison = run_scenario(scenario, keep_traces=True)
        assert len(comparison.traces) == 1
        text = next(iter(comparison.traces.values()))
        assert text.startswith("# leachsim-trace")

    def test_parallel_workers_match_sequential(self):
        src = json.dumps({"protocols": ["LEACH", "OFZ"], "seeds": [1, 2], "sim": SMALL_SIM})
        sequential = run_scenario(parse_config(src), max_workers=1)
        parallel = run_scenario(parse_config(src), max_workers=2)
        assert sequential.reports.keys() == parallel.reports.keys()
        for key in sequential.reports:
            assert sequential.reports[key].to_json() == parallel.reports[key].to_json()


def _fake_report(protocol, seed, **metrics):
    cfg = sim_config_from_dict({}, protocol=protocol, rng_seed=seed)
    values = dict(
        protocol=protocol, seed=seed, node_count=50, sim_duration_s=300.0,
        config=cfg.to_dict(), packets_sent=100, packets_received=90,
        packets_dropped=5, sink_radio_receptions=50, pdr_percent=90.0,
        mean_delay_s=1.0, throughput_pkts_per_s=0.3,
        throughput_received_per_s_x100=30.0, total_energy_j=1.0,
        mean_residual_energy_j=0.5, avg_cluster_members=4.0,
        avg_cluster_heads=5.0, lifetime_fnd_s=300.0, lifetime_hnd_s=300.0,
        deaths=0, energy_closure_max_rel_err=0.0, members_series=[],
        heads_series=[], delivered_kbytes_series=[], per_node_consumed_j={},
    )
    values.update(metrics)
    return RunReport(**values)


def _comparison(metric_values):
    """Build a three-protocol, one-seed comparison with chosen metrics."""
    scenario = Scenario(
        name="fake",
        base=sim_config_from_dict({}),
        protocols=["LEACH", "FZ", "OFZ"],
        seeds=[1],
        node_counts=[50],
    )
    comparison = ComparisonReport(scenario=scenario)
    for protocol in scenario.protocols:
        comparison.reports[(protocol, 50, 1)] = _fake_report(
            protocol, 1, **metric_values[protocol])
    return comparison


class TestVerifyTrends:
    def test_missing_protocol_rejected(self):
        scenario = parse_config(json.dumps(
            {"protocols": ["LEACH"], "seeds": [1], "sim": SMALL_SIM}))
        comparison = run_scenario(scenario)
        with pytest.raises(ValueError):
            verify_trends(comparison)

    def test_correct_ordering_passes(self):
        comparison = _comparison({
            "OFZ": {"pdr_percent": 92.0, "mean_delay_s": 0.5, "avg_cluster_heads": 4.0},
            "FZ": {"pdr_percent": 88.0, "mean_delay_s": 1.0, "avg_cluster_heads": 4.5},
            "LEACH": {"pdr_percent": 80.0, "mean_delay_s": 1.2, "avg_cluster_heads": 5.0},
        })
        verdicts = verify_trends(comparison)
        assert len(verdicts) == 8
        assert all(v.passed for v in verdicts)

    def test_equal_values_pass_nonstrict(self):
        same = {"pdr_percent": 90.0, "mean_delay_s": 1.0, "avg_cluster_heads": 5.0}
        comparison = _comparison({"OFZ": same, "FZ": same, "LEACH": same})
        assert all(v.passed for v in verify_trends(comparison))

    def test_inverted_ordering_fails_with_numbers(self):
        comparison = _comparison({
            "OFZ": {"pdr_percent": 70.0},
            "FZ": {"pdr_percent": 88.0},
            "LEACH": {"pdr_percent": 80.0},
        })
        verdicts = verify_trends(comparison)
        failed = [v for v in verdicts if not v.passed]
        assert len(failed) == 1
        assert failed[0].values == {"OFZ": 70.0, "FZ": 88.0}
        assert "OFZ" in failed[0].describe() and "FAIL" in failed[0].describe()
