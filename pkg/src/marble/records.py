"""Append-only run records: ordered event logs with per-agent private views.

Every run produces one record. Events carry a gap-free sequence number and an
explicit audience; an agent's private view is exactly the subsequence of events
that list it in their audience. Wall-clock time is recorded on each event but
excluded from equality so that replays compare structurally.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import SequenceError

RUN_START = "run_start"


def canonical_json(obj: Any) -> str:
    """Serialize with a stable key order so identical data yields identical bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class LogicalClock:
    """Deterministic clock: every reading is 0.0. Default for reproducible runs."""

    def now(self) -> float:
        return 0.0


class WallClock:
    """Real wall-clock readings, for runs against remote backends."""

    def now(self) -> float:
        return time.time()


@dataclass
class EventEntry:
    """One log line: {seq, wall_time, kind, actor, audience[], payload}."""

    seq: int
    kind: str
    actor: str
    audience: list[str]
    payload: dict[str, Any]
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "wall_time": self.wall_time,
            "kind": self.kind,
            "actor": self.actor,
            "audience": list(self.audience),
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EventEntry":
        return cls(
            seq=data["seq"],
            kind=data["kind"],
            actor=data["actor"],
            audience=list(data["audience"]),
            payload=data["payload"],
            wall_time=data.get("wall_time", 0.0),
        )

    def __eq__(self, other: object) -> bool:
        # wall_time is bookkeeping, not identity
        if not isinstance(other, EventEntry):
            return NotImplemented
        return (
            self.seq == other.seq
            and self.kind == other.kind
            and self.actor == other.actor
            and self.audience == other.audience
            and self.payload == other.payload
        )


@dataclass(eq=False)
class RunRecord:
    """Ordered event log plus derived per-agent views.

    Single writer: one appender at a time. Readers may snapshot freely.
    """

    events: list[EventEntry] = field(default_factory=list)
    views: dict[str, list[int]] = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        if self.events and self.events[0].kind == RUN_START:
            return self.events[0].payload.get("run_id", "")
        return ""

    @property
    def config_snapshot(self) -> Optional[dict[str, Any]]:
        if self.events and self.events[0].kind == RUN_START:
            return self.events[0].payload.get("config")
        return None

    def append(self, event: EventEntry) -> "RunRecord":
        expected = self.events[-1].seq + 1 if self.events else 0
        if event.seq != expected:
            raise SequenceError(f"expected seq {expected}, got {event.seq}")
        self.events.append(event)
        for agent in event.audience:
            self.views.setdefault(agent, []).append(event.seq)
        return self

    def view(self, agent: str) -> list[EventEntry]:
        """Events visible to one agent, in log order."""
        return [self.events[seq] for seq in self.views.get(agent, [])]

    def serialize(self) -> str:
        """One canonical JSON object per line, newline-terminated."""
        return "".join(canonical_json(e.to_dict()) + "\n" for e in self.events)

    @classmethod
    def deserialize(cls, text: str) -> "RunRecord":
        record = cls()
        for line in text.splitlines():
            if line.strip():
                record.append(EventEntry.from_dict(json.loads(line)))
        return record

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunRecord):
            return NotImplemented
        return self.events == other.events


def append_event(record: RunRecord, event: EventEntry) -> RunRecord:
    """Functional alias for RunRecord.append."""
    return record.append(event)


class EventRecorder:
    """Single append path shared by the engine and environments.

    Stamps sequence numbers and wall times so callers only name the event.
    """

    def __init__(self, record: Optional[RunRecord] = None, clock=None):
        self.record = record if record is not None else RunRecord()
        self.clock = clock if clock is not None else LogicalClock()

    def emit(
        self,
        kind: str,
        actor: str = "engine",
        audience: Optional[Iterable[str]] = None,
        **payload: Any,
    ) -> EventEntry:
        event = EventEntry(
            seq=len(self.record.events),
            kind=kind,
            actor=actor,
            audience=sorted(audience) if audience else [],
            payload=payload,
            wall_time=self.clock.now(),
        )
        self.record.append(event)
        return event
