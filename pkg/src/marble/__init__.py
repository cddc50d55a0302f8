"""Multi-agent coordination engine with scripted social-simulation environments."""

from .config import AgentSpec, ProtocolKind, RunConfig, StrategyKind, load_config
from .engine import Engine, run
from .graph import AgentGraph, RelationKind, RelationTriple, build_graph, route_permitted
from .records import EventEntry, EventRecorder, RunRecord, append_event

__all__ = [
    "AgentGraph",
    "AgentSpec",
    "Engine",
    "EventEntry",
    "EventRecorder",
    "ProtocolKind",
    "RelationKind",
    "RelationTriple",
    "RunConfig",
    "RunRecord",
    "StrategyKind",
    "append_event",
    "build_graph",
    "load_config",
    "route_permitted",
    "run",
]

__version__ = "0.1.0"
