"""Agent graph: typed relation triples and the communication gate.

The graph is the sole authority on who may talk to whom; every message the
engine routes is checked against it. Mutual relation kinds are stored as two
directed triples, supervision stays directed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import UnknownAgentError


class RelationKind(str, Enum):
    COLLABORATES = "collaborates"
    SUPERVISES = "supervises"
    NEGOTIATES = "negotiates"


# collaboration and negotiation are mutual; supervision is not
SYMMETRIC_KINDS = {RelationKind.COLLABORATES, RelationKind.NEGOTIATES}


@dataclass(frozen=True)
class RelationTriple:
    """Directed edge (from_agent, kind, to_agent)."""

    from_agent: str
    kind: RelationKind
    to_agent: str

    def __post_init__(self):
        if self.from_agent == self.to_agent:
            raise ValueError(f"self-relation on agent {self.from_agent!r}")

    def to_dict(self) -> dict:
        return {"from": self.from_agent, "kind": self.kind.value, "to": self.to_agent}

    @classmethod
    def from_dict(cls, data: dict) -> "RelationTriple":
        return cls(data["from"], RelationKind(data["kind"]), data["to"])


@dataclass
class AgentGraph:
    """Immutable after build; safe to share read-only."""

    agents: frozenset[str]
    edges: frozenset[RelationTriple]
    _adjacency: dict[str, set[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for edge in self.edges:
            self._adjacency.setdefault(edge.from_agent, set()).add(edge.to_agent)

    def neighbors(self, agent: str) -> list[str]:
        """Agents `agent` may send to, sorted for deterministic iteration."""
        if agent not in self.agents:
            raise UnknownAgentError(agent)
        return sorted(self._adjacency.get(agent, ()))

    def sorted_agents(self) -> list[str]:
        return sorted(self.agents)

    def sorted_edges(self) -> list[RelationTriple]:
        return sorted(self.edges, key=lambda e: (e.from_agent, e.kind.value, e.to_agent))


def build_graph(config) -> AgentGraph:
    """Build the relation graph from a validated config.

    Pure: the same config always yields the identical graph. Symmetric kinds
    are expanded to both directions; duplicates collapse silently.
    """
    agents = frozenset(spec.id for spec in config.agents)
    edges: set[RelationTriple] = set()
    for triple in config.relations:
        edges.add(triple)
        if triple.kind in SYMMETRIC_KINDS:
            edges.add(RelationTriple(triple.to_agent, triple.kind, triple.from_agent))
    return AgentGraph(agents=agents, edges=frozenset(edges))


def with_planner_links(graph: AgentGraph, pairs: list[tuple[str, str]]) -> AgentGraph:
    """Overlay supervises edges (both directions) for planner/actor pairs.

    Centralized protocols synthesize these at build time so that message
    gating stays a single rule for all four topologies.
    """
    edges = set(graph.edges)
    for planner, actor in pairs:
        edges.add(RelationTriple(planner, RelationKind.SUPERVISES, actor))
        edges.add(RelationTriple(actor, RelationKind.SUPERVISES, planner))
    return AgentGraph(agents=graph.agents, edges=frozenset(edges))


def route_permitted(graph: AgentGraph, from_agent: str, to_agent: str) -> bool:
    """True iff some triple (from_agent, *, to_agent) exists."""
    if from_agent not in graph.agents:
        raise UnknownAgentError(from_agent)
    if to_agent not in graph.agents:
        raise UnknownAgentError(to_agent)
    return to_agent in graph._adjacency.get(from_agent, ())
