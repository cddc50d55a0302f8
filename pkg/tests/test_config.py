"""Config parsing and validation tests."""

import pytest

from marble.config import AgentRole, ProtocolKind, RunConfig, StrategyKind, load_config
from marble.errors import ConfigError

MINIMAL = """
agents:
  - {id: a1, role: actor}
  - {id: a2, role: actor}
relations:
  - {from: a1, kind: collaborates, to: a2}
protocol: graph
strategy: vanilla
scenario: notepad
max_iterations: 3
max_comm_iterations: 2
seed: 42
backend: {kind: scripted}
"""


def test_minimal_round_trip():
    config = load_config(MINIMAL.encode())
    assert [a.id for a in config.agents] == ["a1", "a2"]
    assert len(config.relations) == 1
    assert config.protocol is ProtocolKind.GRAPH
    assert config.strategy is StrategyKind.VANILLA
    assert config.seed == 42
    assert RunConfig.from_dict(config.to_dict()) == config


def test_unknown_agent_in_relation_names_the_id():
    bad = MINIMAL.replace("to: a2}", "to: ghost}")
    with pytest.raises(ConfigError, match="ghost"):
        load_config(bad)


def test_duplicate_agent_ids_rejected():
    bad = MINIMAL.replace("id: a2", "id: a1")
    with pytest.raises(ConfigError, match="duplicate"):
        load_config(bad)


def test_empty_agent_id_rejected():
    bad = MINIMAL.replace("{id: a1, role: actor}", "{id: '', role: actor}")
    with pytest.raises(ConfigError, match="non-empty"):
        load_config(bad)


def test_long_scenario_iteration_cap_stored():
    config = load_config(MINIMAL.replace("max_iterations: 3", "max_iterations: 20"))
    assert config.max_iterations == 20


def test_iteration_caps_must_be_positive():
    with pytest.raises(ConfigError, match="max_iterations"):
        load_config(MINIMAL.replace("max_iterations: 3", "max_iterations: 0"))
    with pytest.raises(ConfigError, match="max_comm_iterations"):
        load_config(MINIMAL.replace("max_comm_iterations: 2", "max_comm_iterations: -1"))


def test_parse_failure_reported():
    with pytest.raises(ConfigError, match="parse"):
        load_config(b"agents: [unclosed")


def test_star_requires_a_planner():
    with pytest.raises(ConfigError, match="planner"):
        load_config(MINIMAL.replace("protocol: graph", "protocol: star"))


def test_decentralized_rejects_planners():
    bad = MINIMAL.replace("{id: a1, role: actor}", "{id: a1, role: planner}")
    with pytest.raises(ConfigError, match="zero planners"):
        load_config(bad)


def test_chain_protocol_accepts_actor_only_team():
    config = load_config(MINIMAL.replace("protocol: graph", "protocol: chain"))
    assert config.protocol is ProtocolKind.CHAIN
    assert all(a.role is AgentRole.ACTOR for a in config.agents)


def test_tree_parent_map_must_have_single_root():
    doc = """
agents:
  - {id: root, role: planner}
  - {id: mid, role: planner}
  - {id: leaf, role: actor}
relations: []
protocol: tree
tree_parents: {mid: root, leaf: mid, root: mid}
"""
    with pytest.raises(ConfigError, match="root|cycle"):
        load_config(doc)


def test_run_id_is_deterministic():
    a = load_config(MINIMAL)
    b = load_config(MINIMAL)
    assert a.run_id() == b.run_id()
    c = load_config(MINIMAL.replace("seed: 42", "seed: 43"))
    assert c.run_id() != a.run_id()


def test_scenario_extras_preserved():
    doc = MINIMAL.replace("scenario: notepad", "scenario: {kind: notepad, task: build it}")
    config = load_config(doc)
    assert config.scenario_kind == "notepad"
    assert config.scenario["task"] == "build it"
