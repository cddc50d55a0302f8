"""Agent graph construction and routing-gate tests."""

import itertools

import pytest

from marble.config import AgentSpec, RunConfig
from marble.errors import UnknownAgentError
from marble.graph import RelationKind, RelationTriple, build_graph, route_permitted, with_planner_links


def config_with(agents, relations):
    return RunConfig(
        agents=[AgentSpec(id=a) for a in agents],
        relations=relations,
    )


def test_two_agents_one_collaboration_edge():
    config = config_with(["a1", "a2"], [RelationTriple("a1", RelationKind.COLLABORATES, "a2")])
    graph = build_graph(config)
    assert graph.agents == {"a1", "a2"}
    assert route_permitted(graph, "a1", "a2")
    assert route_permitted(graph, "a2", "a1")  # collaborates is symmetrized


def test_no_relations_means_no_communication():
    graph = build_graph(config_with(["a1", "a2", "a3"], []))
    for a, b in itertools.permutations(["a1", "a2", "a3"], 2):
        assert not route_permitted(graph, a, b)


def test_fully_connected_three_agents_yields_six_directed_triples():
    # independent enumeration: 3 unordered pairs, each symmetrized to 2 triples
    agents = ["a1", "a2", "a3"]
    relations = [
        RelationTriple(a, RelationKind.COLLABORATES, b)
        for a, b in itertools.combinations(agents, 2)
    ]
    graph = build_graph(config_with(agents, relations))
    expected = {(a, b) for a, b in itertools.permutations(agents, 2)}
    assert {(e.from_agent, e.to_agent) for e in graph.edges} == expected
    assert len(graph.edges) == 6


def test_supervises_stays_directed():
    graph = build_graph(config_with(["boss", "worker"], [RelationTriple("boss", RelationKind.SUPERVISES, "worker")]))
    assert route_permitted(graph, "boss", "worker")
    assert not route_permitted(graph, "worker", "boss")


def test_duplicate_triples_deduplicated():
    triple = RelationTriple("a1", RelationKind.NEGOTIATES, "a2")
    graph = build_graph(config_with(["a1", "a2"], [triple, triple]))
    assert len(graph.edges) == 2  # forward + symmetrized reverse


def test_self_relation_rejected():
    with pytest.raises(ValueError):
        RelationTriple("a1", RelationKind.COLLABORATES, "a1")


def test_unknown_agent_raises():
    graph = build_graph(config_with(["a1", "a2"], []))
    with pytest.raises(UnknownAgentError):
        route_permitted(graph, "a1", "ghost")
    with pytest.raises(UnknownAgentError):
        route_permitted(graph, "ghost", "a1")


def test_build_graph_is_pure():
    config = config_with(["a1", "a2"], [RelationTriple("a1", RelationKind.COLLABORATES, "a2")])
    assert build_graph(config) == build_graph(config)
    assert build_graph(config).sorted_edges() == build_graph(config).sorted_edges()


def test_planner_links_added_both_directions():
    graph = build_graph(config_with(["hub", "a1"], []))
    linked = with_planner_links(graph, [("hub", "a1")])
    assert route_permitted(linked, "hub", "a1")
    assert route_permitted(linked, "a1", "hub")
    assert not route_permitted(graph, "hub", "a1")  # original untouched


def test_sorted_edges_deterministic_order():
    relations = [
        RelationTriple("b", RelationKind.SUPERVISES, "a"),
        RelationTriple("a", RelationKind.SUPERVISES, "b"),
    ]
    graph = build_graph(config_with(["a", "b"], relations))
    ordered = graph.sorted_edges()
    assert [(e.from_agent, e.to_agent) for e in ordered] == [("a", "b"), ("b", "a")]
