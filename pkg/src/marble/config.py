"""Run configuration: parsing, validation, and serialization.

Configs are YAML documents (a JSON-compatible subset works too). Validation
names the violated invariant and offending field so bad configs fail loudly
before a run starts.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, BinaryIO, Optional, Union

import yaml

from .errors import ConfigError
from .graph import RelationTriple
from .records import canonical_json


class AgentRole(str, Enum):
    PLANNER = "planner"
    ACTOR = "actor"


class ProtocolKind(str, Enum):
    STAR = "star"
    TREE = "tree"
    GRAPH = "graph"
    CHAIN = "chain"


class StrategyKind(str, Enum):
    VANILLA = "vanilla"
    COT = "cot"
    GROUP_DISCUSSION = "group_discussion"
    COGNITIVE = "cognitive"


CENTRALIZED = {ProtocolKind.STAR, ProtocolKind.TREE}
DECENTRALIZED = {ProtocolKind.GRAPH, ProtocolKind.CHAIN}


@dataclass
class AgentSpec:
    id: str
    role: AgentRole = AgentRole.ACTOR
    profile: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.role = AgentRole(self.role)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "role": self.role.value, "profile": self.profile}
        out.update(self.extras)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AgentSpec":
        known = {"id", "role", "profile"}
        return cls(
            id=data.get("id", ""),
            role=AgentRole(data.get("role", "actor")),
            profile=data.get("profile", ""),
            extras={k: v for k, v in data.items() if k not in known},
        )


@dataclass
class BackendSpec:
    kind: str = "scripted"  # scripted | remote
    policy: dict[str, Any] = field(default_factory=dict)  # scripted: agent -> cue -> [responses]
    model: str = ""
    api_base: Optional[str] = None
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.policy:
            out["policy"] = self.policy
        if self.model:
            out["model"] = self.model
        if self.api_base:
            out["api_base"] = self.api_base
        if self.params:
            out["params"] = self.params
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BackendSpec":
        return cls(
            kind=data.get("kind", "scripted"),
            policy=data.get("policy", {}) or {},
            model=data.get("model", ""),
            api_base=data.get("api_base"),
            params=data.get("params", {}) or {},
        )


@dataclass
class RunConfig:
    agents: list[AgentSpec]
    relations: list[RelationTriple]
    protocol: ProtocolKind = ProtocolKind.GRAPH
    strategy: StrategyKind = StrategyKind.VANILLA
    scenario: dict[str, Any] = field(default_factory=lambda: {"kind": "notepad"})
    max_iterations: int = 5
    max_comm_iterations: int = 5
    seed: int = 0
    backend: BackendSpec = field(default_factory=BackendSpec)
    tree_parents: dict[str, str] = field(default_factory=dict)  # child -> parent, tree protocol only

    @property
    def scenario_kind(self) -> str:
        return self.scenario.get("kind", "notepad")

    def agent_ids(self) -> list[str]:
        return [a.id for a in self.agents]

    def planners(self) -> list[AgentSpec]:
        return [a for a in self.agents if a.role is AgentRole.PLANNER]

    def actors(self) -> list[AgentSpec]:
        return [a for a in self.agents if a.role is AgentRole.ACTOR]

    def agent(self, agent_id: str) -> AgentSpec:
        for spec in self.agents:
            if spec.id == agent_id:
                return spec
        raise KeyError(agent_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "agents": [a.to_dict() for a in self.agents],
            "relations": [r.to_dict() for r in self.relations],
            "protocol": self.protocol.value,
            "strategy": self.strategy.value,
            "scenario": self.scenario,
            "max_iterations": self.max_iterations,
            "max_comm_iterations": self.max_comm_iterations,
            "seed": self.seed,
            "backend": self.backend.to_dict(),
            **({"tree_parents": self.tree_parents} if self.tree_parents else {}),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        try:
            scenario = data.get("scenario", "notepad")
            if isinstance(scenario, str):
                scenario = {"kind": scenario}
            config = cls(
                agents=[AgentSpec.from_dict(a) for a in data.get("agents", [])],
                relations=[RelationTriple.from_dict(r) for r in data.get("relations", [])],
                protocol=ProtocolKind(data.get("protocol", "graph")),
                strategy=StrategyKind(data.get("strategy", "vanilla")),
                scenario=scenario,
                max_iterations=int(data.get("max_iterations", 5)),
                max_comm_iterations=int(data.get("max_comm_iterations", 5)),
                seed=int(data.get("seed", 0)),
                backend=BackendSpec.from_dict(data.get("backend", {}) or {}),
                tree_parents=dict(data.get("tree_parents", {}) or {}),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        validate_config(config)
        return config

    def run_id(self) -> str:
        """Deterministic run id derived from the config content."""
        digest = hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8"))
        return digest.hexdigest()[:12]


def validate_config(config: RunConfig) -> None:
    """Check all config invariants; raises ConfigError naming the violation."""
    seen: set[str] = set()
    for spec in config.agents:
        if not spec.id:
            raise ConfigError("agent id must be non-empty")
        if spec.id in seen:
            raise ConfigError(f"duplicate agent id {spec.id!r}")
        seen.add(spec.id)
    if not config.agents:
        raise ConfigError("config must declare at least one agent")
    for triple in config.relations:
        for endpoint in (triple.from_agent, triple.to_agent):
            if endpoint not in seen:
                raise ConfigError(f"relation references unknown agent id {endpoint!r}")
    if config.max_iterations < 1:
        raise ConfigError(f"max_iterations must be >= 1, got {config.max_iterations}")
    if config.max_comm_iterations < 1:
        raise ConfigError(f"max_comm_iterations must be >= 1, got {config.max_comm_iterations}")
    if config.seed < 0 or config.seed >= 2**64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {config.seed}")
    n_planners = len(config.planners())
    if config.protocol in CENTRALIZED and n_planners < 1:
        raise ConfigError(f"protocol {config.protocol.value!r} requires at least one planner")
    if config.protocol in DECENTRALIZED and n_planners > 0:
        raise ConfigError(f"protocol {config.protocol.value!r} requires zero planners")
    if config.backend.kind not in ("scripted", "remote"):
        raise ConfigError(f"unknown backend kind {config.backend.kind!r}")
    if config.tree_parents:
        _validate_tree(config, seen)


def _validate_tree(config: RunConfig, agent_ids: set[str]) -> None:
    parents = config.tree_parents
    for child, parent in parents.items():
        if child not in agent_ids:
            raise ConfigError(f"tree parent map references unknown agent id {child!r}")
        if parent not in agent_ids:
            raise ConfigError(f"tree parent map references unknown agent id {parent!r}")
    roots = [a for a in agent_ids if a not in parents]
    if len(roots) != 1:
        raise ConfigError(f"tree parent map must leave exactly one root, found {sorted(roots)}")
    # reject cycles: every node must reach the root
    root = roots[0]
    for node in agent_ids:
        hops, cursor = 0, node
        while cursor != root:
            cursor = parents[cursor]
            hops += 1
            if hops > len(agent_ids):
                raise ConfigError("tree parent map contains a cycle")


def load_config(source: Union[bytes, str, BinaryIO]) -> RunConfig:
    """Parse and validate a config document from bytes, text, or a stream."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    try:
        data = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    return RunConfig.from_dict(data)


def load_config_file(path) -> RunConfig:
    with open(path, "rb") as fh:
        return load_config(fh)
