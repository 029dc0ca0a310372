import json

import pytest

from conftest import scenario
from core.loader import (
    ConfigError,
    SnapshotFile,
    apply_overrides,
    load_scenario,
    load_snapshot,
)
from wae.domain import DimensionMismatch, FunctionType, Topology


def test_bundled_scenario(evaluation_config):
    assert evaluation_config.machines.count == 3
    assert [p.total_users for p in evaluation_config.phases] == [5000, 1500, 500]
    assert evaluation_config.time_compression == 10
    assert evaluation_config.horizon == 300
    assert evaluation_config.start_assignment().to_lists() == [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0]]


def test_bundled_scenario_by_name(evaluation_config):
    config = load_scenario("paper-scenario", env=False)
    assert config.name == "paper-scenario"
    assert config == evaluation_config
    assert load_scenario("evaluation", env=False) == config


def test_missing_file_names_the_path(tmp_path):
    path = tmp_path / "nope.json"
    with pytest.raises(ConfigError) as e:
        load_scenario(str(path))
    assert str(path) in str(e.value)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_scenario(str(path))


def test_validation_errors_list_fields():
    with pytest.raises(ConfigError) as e:
        scenario(machines={"count": 0}, orchestration={"threshold": 1.5})
    assert any(line.startswith("machines.count") for line in e.value.errors)
    assert any(line.startswith("orchestration.threshold") for line in e.value.errors)


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        scenario(machine={"count": 3})


def test_phases_target_edge_types():
    with pytest.raises(ConfigError):
        scenario(phases=[{"type": "dns", "total_users": 1, "requests_per_user_per_second": 1,
                          "mean_response_size": 1}])


def test_initial_assignment_shape():
    with pytest.raises(ConfigError):
        scenario(initial_assignment=[[1, 0, 0, 0]])
    with pytest.raises(ConfigError):
        scenario(machines={"count": 1}, initial_assignment=[[1, 0, 2, 0]])


def test_service_demand_merges_defaults():
    config = scenario(latency={"service_demand": {"vod_edge": 2.0}})
    assert config.latency.service_demand[FunctionType.VOD_EDGE] == 2.0
    assert config.latency.service_demand[FunctionType.SMALL_EDGE] == 0.3


def test_environment_overrides(tmp_path, monkeypatch):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"name": "env"}))
    monkeypatch.setenv("WAE_PORT", "9100")
    monkeypatch.setenv("WAE_SNAPSHOT_PATH", str(tmp_path / "state.json"))
    config = load_scenario(str(path))
    assert config.service.port == 9100
    assert config.service.snapshot_path == str(tmp_path / "state.json")
    assert load_scenario(str(path), env=False).service.port == 8000

    monkeypatch.setenv("WAE_PORT", "eighty")
    with pytest.raises(ConfigError):
        load_scenario(str(path))


def test_command_line_overrides(evaluation_config):
    config = apply_overrides(evaluation_config, seed=7, threshold=0.2, topologies=[Topology.ORCHESTRATED])
    assert config.seed == 7
    assert config.orchestration.threshold == 0.2
    assert config.topologies == [Topology.ORCHESTRATED]
    with pytest.raises(ConfigError):
        apply_overrides(evaluation_config, threshold=2.0)


def test_snapshot_file_short_names(tmp_path):
    path = tmp_path / "snapshot.json"
    path.write_text(json.dumps({
        "period_id": 4,
        "machines": [{"machine": 0, "c": 0.3, "t": 0.4}, {"machine": 1, "c": 0.2, "t": 0.1}],
        "r": [10, 0, 0, 0],
        "A": [[1, 0, 0, 0], [0, 0, 0, 0]],
    }))
    snapshot = load_snapshot(str(path)).to_snapshot()
    assert snapshot.period_id == 4
    assert snapshot.requests.counts == (10, 0, 0, 0)
    assert SnapshotFile.from_snapshot(snapshot).assignment == [[1, 0, 0, 0], [0, 0, 0, 0]]


def test_ragged_snapshot_matrix():
    document = SnapshotFile(machines=[{"machine": 0, "c": 0.1, "t": 0.1}], requests=[1, 0, 0, 0],
                            assignment=[[1, 0, 0, 0], [1, 0]])
    with pytest.raises(DimensionMismatch):
        document.to_snapshot()
