import json

import pytest
import yaml

from enercov.errors import ConfigurationError
from enercov.scenario import BaselineParams, load_scenario, scenario_from_dict

from conftest import SCENARIOS

MINIMAL = {
    "space": {"width": 100, "height": 50},
    "sensing": {"range": 20},
    "energy": {"alpha": 0.001, "beta": 0.001, "c": 0.02, "vmax": 10},
    "agents": 2,
}


def test_shipped_scenarios_load():
    three = load_scenario(SCENARIOS / "three_agents.yaml")
    assert three.n_agents == 3 and three.horizon == 1000 and three.dt == 0.1
    assert three.field.values.shape == (250, 300)
    assert three.initial_soc == [1.0, 1.0, 1.0]
    assert three.energy.c == 0.01 and three.energy.vmax == 50
    six = load_scenario(SCENARIOS / "six_agents.yaml")
    assert six.n_agents == 6 and six.energy.c == 0.025 and six.energy.vmax == 100
    assert load_scenario(SCENARIOS / "three_agents_long.yaml").horizon == 3000


def test_defaults_fill_in():
    sc = scenario_from_dict(MINIMAL)
    assert sc.horizon == 1000 and sc.dt == 0.1 and sc.seed == 0
    assert sc.tour_mode == "exact" and sc.dwell_rule == "reserve"
    assert sc.baseline == BaselineParams(0.3, 1.0)
    assert sc.field.cell == 2.0 and sc.field.sigma == 1.0
    assert sc.space.station == (0.0, 0.0)
    assert sc.solver_options("OCV").initial == []


def test_json_and_yaml_agree(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps(MINIMAL))
    (tmp_path / "a.yaml").write_text(yaml.safe_dump(MINIMAL))
    a = load_scenario(tmp_path / "a.json")
    b = load_scenario(tmp_path / "a.yaml")
    assert a.energy == b.energy and a.n_agents == b.n_agents


def test_reward_file_relative_to_scenario(tmp_path):
    (tmp_path / "r.txt").write_text("100 50 10\n" + " ".join(["2"] * 50) + "\n")
    raw = dict(MINIMAL, field={"file": "r.txt"})
    (tmp_path / "s.yaml").write_text(yaml.safe_dump(raw))
    sc = load_scenario(tmp_path / "s.yaml")
    assert sc.field.cell == 10 and sc.field.sigma == 2.0


@pytest.mark.parametrize("patch", [
    {"agents": 0},
    {"agents": "many"},
    {"energy": {"alpha": 0.001, "beta": 0.001, "c": 0.0005, "vmax": 10}},
    {"energy": {"alpha": "x", "beta": 0.001, "c": 0.02, "vmax": 10}},
    {"space": {"width": 100, "height": 50, "station": [200, 0]}},
    {"initial_soc": [1.0]},
    {"initial_soc": 1.5},
    {"planning": {"tour": "ilp"}},
    {"planning": {"dwell_rule": "loose"}},
    {"dt": 0},
    {"horizon": -1},
    {"baseline": {"q_low": 1.0}},
    {"field": {"uniform": 1.0, "cell": 3.0}},
    {"field": {"file": "missing.txt"}},
    {"sensing": None},
])
def test_bad_scenarios_raise_configuration_error(patch):
    raw = dict(MINIMAL)
    raw.update(patch)
    if raw.get("sensing") is None:
        raw.pop("sensing")
    with pytest.raises(ConfigurationError):
        scenario_from_dict(raw)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "nope.yaml")
    (tmp_path / "bad.yaml").write_text("space: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "list.yaml")


def test_overrides():
    sc = scenario_from_dict(MINIMAL).with_overrides(seed=4, dt=0.5, grid=5.0)
    assert sc.seed == 4 and sc.dt == 0.5 and sc.field.cell == 5.0
    assert sc.field.values.shape == (10, 20)
    assert sc.solver_options("OCH").seed == 4
