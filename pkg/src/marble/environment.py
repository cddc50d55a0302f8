"""Environment abstraction: tool registry, step dispatch, and outcome reporting.

Agents act only through named tool invocations; state changes only through
step(). Bad calls (unknown tool, invalid arguments, wrong phase) come back as
error outcomes and never mutate state or crash the run.

Environments come in two flavors:
  * free-running — the coordination engine drives actors per protocol and the
    environment just applies their tool calls (scratchpad, bargaining);
  * mediated — the environment publishes decision requests and relays results
    itself, so all messages pass through it (the social-deduction game).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .records import EventRecorder


@dataclass
class ToolParam:
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""


@dataclass
class ToolSchema:
    name: str
    description: str = ""
    parameters: list[ToolParam] = field(default_factory=list)

    def to_wire(self) -> dict[str, Any]:
        """Serialize for the backend `tools` array; names stay bit-exact."""
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": {
                    p.name: {"type": p.type, "description": p.description}
                    for p in self.parameters
                },
                "required": [p.name for p in self.parameters if p.required],
            },
        }


@dataclass
class ActionOutcome:
    observation: str = ""
    state_delta: dict[str, Any] = field(default_factory=dict)
    terminal: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class DecisionRequest:
    """A mediated environment asking one agent for one decision."""

    agent: str
    cue: str
    tool: ToolSchema
    context: str = ""
    parse_text: Callable[[str], dict[str, Any]] = lambda text: {"text": text}


class Environment:
    """Base environment; subclasses override tools/step and optionally pending."""

    name = "environment"

    def __init__(self, recorder: Optional[EventRecorder] = None):
        self.recorder = recorder if recorder is not None else EventRecorder()
        self._terminal = False

    @property
    def terminal(self) -> bool:
        return self._terminal

    def tools(self) -> list[ToolSchema]:
        return []

    def tool(self, name: str) -> Optional[ToolSchema]:
        for schema in self.tools():
            if schema.name == name:
                return schema
        return None

    def observe(self, agent: str) -> str:
        """Context text the acting agent sees before choosing an action."""
        return ""

    def pending(self) -> Optional[DecisionRequest]:
        """Next decision a mediated environment needs; None for free-running."""
        return None

    def begin_iteration(self, iteration: int) -> None:
        """Engine hook at the top of each iteration."""

    def finish(self) -> None:
        """Engine hook after the final iteration; close out open business."""

    def outcome_summary(self) -> dict[str, Any]:
        """Scenario-specific result payload for the run_end event."""
        return {}

    def step(self, agent: str, name: str, arguments: dict[str, Any]) -> ActionOutcome:
        if self._terminal:
            return ActionOutcome(error="environment is terminal; no further actions")
        schema = self.tool(name)
        if schema is None:
            return ActionOutcome(error=f"unknown tool {name!r}")
        missing = [p.name for p in schema.parameters if p.required and p.name not in arguments]
        if missing:
            return ActionOutcome(error=f"missing required arguments {missing} for tool {name!r}")
        return self._apply(agent, name, arguments)

    def _apply(self, agent: str, name: str, arguments: dict[str, Any]) -> ActionOutcome:
        raise NotImplementedError


class ScratchpadEnv(Environment):
    """Minimal task environment: agents post notes onto a shared pad.

    Exists so the coordination protocols can be exercised end to end without
    any external system; the pad content stands in for task output.
    """

    name = "notepad"

    def __init__(self, task: str = "", recorder: Optional[EventRecorder] = None):
        super().__init__(recorder)
        self.task = task
        self.pad: list[dict[str, str]] = []

    def tools(self) -> list[ToolSchema]:
        return [
            ToolSchema(
                "submit_note",
                "Append a note with your results to the shared pad.",
                [ToolParam("text", description="The note content.")],
            )
        ]

    def observe(self, agent: str) -> str:
        lines = [f"Task: {self.task}"] if self.task else []
        lines += [f"[{n['agent']}] {n['text']}" for n in self.pad[-5:]]
        return "\n".join(lines)

    def _apply(self, agent: str, name: str, arguments: dict[str, Any]) -> ActionOutcome:
        text = str(arguments.get("text", ""))
        self.pad.append({"agent": agent, "text": text})
        return ActionOutcome(observation=f"note {len(self.pad)} recorded")

    def outcome_summary(self) -> dict[str, Any]:
        return {"notes": len(self.pad)}


def drive_mediated(env: Environment, backend, recorder: EventRecorder, max_decisions: int = 100000) -> None:
    """Service a mediated environment's decision requests until it goes quiet.

    Each request becomes one backend completion; text responses are parsed by
    the request's adapter, tool responses pass through. Malformed calls are
    logged and consume the turn.
    """
    from .backend import CompletionRequest  # local import to avoid cycles

    served = 0
    while not env.terminal and served < max_decisions:
        request = env.pending()
        if request is None:
            break
        completion = CompletionRequest(
            system_text=request.context,
            tools=[request.tool.to_wire()],
        )
        response = backend.complete(request.agent, completion, request.cue)
        if response.kind == "tool_call":
            name, arguments = response.tool.name, response.tool.arguments
        else:
            name, arguments = request.tool.name, request.parse_text(response.text)
        outcome = env.step(request.agent, name, arguments)
        if not outcome.ok:
            recorder.emit(
                "invalid_call",
                actor=request.agent,
                tool=name,
                cue=request.cue,
                reason=outcome.error,
            )
        served += 1
