"""Coordination engine: drives a run under one of four protocols.

star   — a single central planner assigns tasks, actors act, planner consolidates
tree   — a root planner delegates through mid-level planners down to actors
graph  — peers exchange edge-gated messages, then each acts
chain  — actors act in sequence, each seeing the previous actor's output

Centralized protocols (star/tree) plan with one of four strategies: vanilla,
cot, group_discussion, or cognitive (expected-outcome bookkeeping with lesson
records fed back into later plans). Every message the engine routes is checked
against the relation graph; rejected sends are logged, not delivered.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .backend import CompletionRequest, CompletionResponse
from .config import AgentRole, ProtocolKind, RunConfig, StrategyKind
from .environment import Environment
from .errors import PlanError, ProtocolError, UnknownAgentError
from .graph import AgentGraph, build_graph, route_permitted, with_planner_links
from .memory import MemoryStore
from .records import EventRecorder, RunRecord

_ASSIGNMENT_RE = re.compile(r"^\s*(?:-\s*)?(?P<id>[A-Za-z0-9_.\-]+)\s*:\s*(?P<text>.+?)\s*$")
_EXPECT_RE = re.compile(r"^\s*(?:-\s*)?expect\s+(?P<id>[A-Za-z0-9_.\-]+)\s*:\s*(?P<text>.+?)\s*$")


@dataclass
class PlanRecord:
    iteration: int
    planner: str
    assignments: dict[str, str]
    rationale: str = ""
    expected_outcomes: dict[str, str] = field(default_factory=dict)


@dataclass
class ExperienceRecord:
    iteration: int
    agent: str
    expected: str
    actual: str
    lesson: str


def parse_plan_text(text: str, actors: list[str]) -> tuple[dict[str, str], dict[str, str], str]:
    """Split a planner completion into assignments, expected outcomes, rationale.

    Assignment lines look like `actor_id: subtask`; cognitive plans may add
    `expect actor_id: outcome` lines. Anything else is rationale.
    """
    assignments: dict[str, str] = {}
    expected: dict[str, str] = {}
    rationale: list[str] = []
    allowed = set(actors)
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _EXPECT_RE.match(line)
        if match and match.group("id") in allowed:
            expected[match.group("id")] = match.group("text")
            continue
        match = _ASSIGNMENT_RE.match(line)
        if match and match.group("id") in allowed:
            assignments[match.group("id")] = match.group("text")
            continue
        rationale.append(line.strip())
    return assignments, expected, "\n".join(rationale)


def _try_complete(backend, agent: str, request: CompletionRequest, cue: str) -> Optional[CompletionResponse]:
    """Optional turn: scripted backends may simply decline by omitting the cue."""
    if hasattr(backend, "try_complete"):
        return backend.try_complete(agent, request, cue)
    return backend.complete(agent, request, cue)


def plan(
    strategy: StrategyKind,
    *,
    iteration: int,
    planner: str,
    actors: list[str],
    task: str,
    profiles: dict[str, str],
    prior_summaries: list[str],
    experiences: list[ExperienceRecord],
    backend,
    recorder: EventRecorder,
    memory: MemoryStore,
    max_comm_iterations: int,
) -> PlanRecord:
    """Produce one iteration's plan under the requested strategy."""
    lines = [f"Task: {task}", "Team:"]
    lines += [f"- {a}: {profiles.get(a, '')}" for a in actors]
    if prior_summaries:
        lines.append("Previous subtask summaries:")
        lines += [f"- {s}" for s in prior_summaries[-5:]]
    if strategy is StrategyKind.COT:
        lines.append("Work through the plan step by step before assigning subtasks.")
    if strategy is StrategyKind.COGNITIVE:
        if experiences:
            lines.append("Experiences from earlier iterations:")
            lines += [f"- {e.agent}: expected {e.expected!r}, got {e.actual!r}; lesson: {e.lesson}" for e in experiences]
        lines.append("For each assignment also state `expect <agent>: <outcome>`.")
    if strategy is StrategyKind.GROUP_DISCUSSION:
        _run_discussion(
            iteration=iteration,
            planner=planner,
            actors=actors,
            task=task,
            backend=backend,
            recorder=recorder,
            max_rounds=max_comm_iterations,
        )
        lines.append("Synthesize the discussion above into one assignment per agent.")
        cue = f"synthesize:{iteration}"
    else:
        cue = f"plan:{iteration}"
    lines.append("Reply with one `agent_id: subtask` line per agent.")
    request = CompletionRequest(
        system_text=profiles.get(planner, "") or "You coordinate the team and assign subtasks.",
        messages=[{"speaker": "engine", "text": "\n".join(lines)}],
    )
    response = backend.complete(planner, request, cue)
    if response.kind != "text":
        raise PlanError("planner must reply with text, got a tool call")
    assignments, expected, rationale = parse_plan_text(response.text, actors)
    if not assignments:
        raise PlanError(f"plan for iteration {iteration} assigned no subtasks")
    record = PlanRecord(iteration, planner, assignments, rationale, expected)
    recorder.emit(
        "plan",
        actor=planner,
        audience=[planner, *assignments],
        iteration=iteration,
        assignments=record.assignments,
        rationale=record.rationale,
        **({"expected_outcomes": expected} if expected else {}),
    )
    memory.remember(planner, f"iteration {iteration} plan: " + "; ".join(f"{a}: {t}" for a, t in sorted(assignments.items())), segment="shared")
    return record


def _run_discussion(*, iteration, planner, actors, task, backend, recorder, max_rounds):
    """Contribution rounds before synthesis; each agent may speak once per round."""
    request = CompletionRequest(messages=[{"speaker": "engine", "text": f"Task: {task}\nShare one insight or constraint, or reply nothing to pass."}])
    for round_no in range(1, max_rounds + 1):
        spoke = False
        for agent in sorted(actors):
            response = _try_complete(backend, agent, request, f"discuss:{iteration}:{round_no}")
            if response is None or response.kind != "text" or not response.text.strip():
                continue
            recorder.emit(
                "discussion",
                actor=agent,
                audience=[planner, *actors],
                iteration=iteration,
                round=round_no,
                text=response.text,
            )
            spoke = True
        if not spoke:
            break


def compare_and_evolve(
    expected: dict[str, str],
    actuals: dict[str, str],
    backend,
    *,
    iteration: int,
    planner: str,
    agents: list[str],
    recorder: EventRecorder,
    memory: MemoryStore,
) -> list[ExperienceRecord]:
    """Compare last iteration's expectations against outcomes, one record per agent."""
    records = []
    for agent in sorted(agents):
        if agent not in expected:
            record = ExperienceRecord(iteration, agent, "", actuals.get(agent, ""), "no expectation recorded")
        elif agent not in actuals:
            record = ExperienceRecord(iteration, agent, expected[agent], "", "no actual outcome recorded")
        else:
            request = CompletionRequest(
                messages=[{
                    "speaker": "engine",
                    "text": f"Agent {agent} was expected to achieve: {expected[agent]}\n"
                    f"Actual outcome: {actuals[agent]}\nState one lesson for future planning.",
                }]
            )
            response = backend.complete(planner, request, f"evolve:{iteration}:{agent}")
            record = ExperienceRecord(iteration, agent, expected[agent], actuals[agent], response.text)
        records.append(record)
        recorder.emit(
            "experience",
            actor=planner,
            audience=[planner],
            iteration=iteration,
            agent=record.agent,
            expected=record.expected,
            actual=record.actual,
            lesson=record.lesson,
        )
        memory.remember(planner, f"lesson about {agent}: {record.lesson}", segment="shared")
    return records


class Engine:
    """One run: builds the graph, iterates the protocol, enforces gating and caps."""

    def __init__(self, config: RunConfig, env: Environment, backend, recorder: Optional[EventRecorder] = None):
        self.config = config
        self.env = env
        self.backend = backend
        self.recorder = recorder if recorder is not None else env.recorder
        self.memory = MemoryStore(config.agent_ids())
        self.rng = random.Random(config.seed)
        self.graph = self._build_effective_graph()
        self._actuals: dict[str, str] = {}
        self._expected: dict[str, str] = {}
        self._experiences: list[ExperienceRecord] = []
        self._summaries: list[str] = []
        self._last_chain_output = ""
        self._compared_iteration = 0

    # -- graph construction -------------------------------------------------

    def _build_effective_graph(self) -> AgentGraph:
        graph = build_graph(self.config)
        protocol = self.config.protocol
        if protocol is ProtocolKind.STAR:
            planners = self.config.planners()
            if len(planners) != 1:
                raise ProtocolError(f"star protocol requires exactly one planner, got {len(planners)}")
            hub = planners[0].id
            pairs = [(hub, a.id) for a in self.config.actors()]
            return with_planner_links(graph, pairs)
        if protocol is ProtocolKind.TREE:
            pairs = [(parent, child) for child, parent in self.tree_parents().items()]
            return with_planner_links(graph, pairs)
        return graph

    def tree_parents(self) -> dict[str, str]:
        """Child -> parent map; defaults to root -> one mid planner -> all actors."""
        if self.config.tree_parents:
            return dict(self.config.tree_parents)
        planners = self.config.planners()
        if not planners:
            raise ProtocolError("tree protocol requires at least one planner")
        root = planners[0].id
        mid = planners[1].id if len(planners) > 1 else root
        parents: dict[str, str] = {}
        for spec in planners[1:]:
            parents[spec.id] = root
        for spec in self.config.actors():
            parents[spec.id] = mid
        return parents

    # -- messaging ----------------------------------------------------------

    def send_message(self, sender: str, receiver: str, text: str, **extra) -> bool:
        """Gate and log one message; returns True when delivered."""
        try:
            permitted = route_permitted(self.graph, sender, receiver)
        except UnknownAgentError:
            permitted = False
        if permitted:
            self.recorder.emit(
                "message", actor=sender, audience=[sender, receiver],
                to=receiver, text=text, **extra,
            )
            return True
        self.recorder.emit(
            "message_rejected", actor=sender, audience=[sender],
            to=receiver, reason="no relation permits this route", **extra,
        )
        return False

    # -- run loop -----------------------------------------------------------

    def run(self) -> RunRecord:
        self.recorder.emit(
            "run_start", run_id=self.config.run_id(), config=self.config.to_dict(),
        )
        iterations_done = 0
        if getattr(self.env, "mediated", False):
            iterations_done = self._run_mediated()
        else:
            iterations_done = self._run_protocol()
        self.env.finish()
        self.recorder.emit(
            "run_end",
            iterations=iterations_done,
            terminal=self.env.terminal,
            summary=self.env.outcome_summary(),
        )
        return self.recorder.record

    def _run_mediated(self) -> int:
        """One iteration per completed environment cycle (e.g. a day-night pair)."""
        from .environment import drive_mediated

        iterations = 0
        while not self.env.terminal and iterations < self.config.max_iterations:
            iterations += 1
            self.recorder.emit("iteration_start", iteration=iterations)
            self.env.begin_iteration(iterations)
            target = getattr(self.env, "cycles_completed", None)
            while not self.env.terminal:
                if target is not None and self.env.cycles_completed > target:
                    break
                if self.env.pending() is None:
                    break
                drive_mediated(self.env, self.backend, self.recorder, max_decisions=1)
            if self.env.pending() is None and not self.env.terminal:
                break
        return iterations

    def _run_protocol(self) -> int:
        dispatch = {
            ProtocolKind.STAR: self._iterate_star,
            ProtocolKind.TREE: self._iterate_tree,
            ProtocolKind.GRAPH: self._iterate_graph,
            ProtocolKind.CHAIN: self._iterate_chain,
        }[self.config.protocol]
        if not self.config.actors():
            raise ProtocolError("run requires at least one actor")
        iterations = 0
        for iteration in range(1, self.config.max_iterations + 1):
            iterations = iteration
            self.recorder.emit("iteration_start", iteration=iteration)
            self.env.begin_iteration(iteration)
            dispatch(iteration)
            if self.env.terminal:
                break
        return iterations

    # -- protocol iterations -------------------------------------------------

    def _profiles(self) -> dict[str, str]:
        return {a.id: a.profile for a in self.config.agents}

    def _task(self) -> str:
        return str(self.config.scenario.get("task", ""))

    def _plan_for(self, iteration: int, planner: str, actors: list[str]) -> PlanRecord:
        cognitive = self.config.strategy is StrategyKind.COGNITIVE
        if cognitive and iteration > 1 and self._compared_iteration < iteration:
            # compare once per iteration, before the first plan of that iteration
            self._compared_iteration = iteration
            self._experiences = compare_and_evolve(
                self._expected,
                self._actuals,
                self.backend,
                iteration=iteration,
                planner=planner,
                agents=sorted(self._expected or dict.fromkeys(actors)),
                recorder=self.recorder,
                memory=self.memory,
            )
            self._expected = {}
        record = plan(
            self.config.strategy,
            iteration=iteration,
            planner=planner,
            actors=actors,
            task=self._task(),
            profiles=self._profiles(),
            prior_summaries=self._summaries,
            experiences=self._experiences,
            backend=self.backend,
            recorder=self.recorder,
            memory=self.memory,
            max_comm_iterations=self.config.max_comm_iterations,
        )
        if cognitive:
            self._expected.update(record.expected_outcomes)
            for agent, outcome in sorted(record.expected_outcomes.items()):
                self.memory.remember(planner, f"expected outcome for {agent}: {outcome}", segment="shared")
        return record

    def _act(self, agent: str, iteration: int, *, cue: Optional[str] = None,
             context: str = "", required: bool = True,
             text_to_call=None, defaults: Optional[dict[str, Any]] = None) -> Optional[str]:
        """One actor turn: completion -> tool call (or text note) -> action event."""
        observation = self.env.observe(agent)
        parts = [p for p in (context, observation) if p]
        request = CompletionRequest(
            system_text=self.config.agent(agent).profile,
            messages=[{"speaker": "engine", "text": "\n".join(parts) or "Act on the task."}],
            tools=[schema.to_wire() for schema in self.env.tools()],
        )
        cue = cue or f"act:{iteration}"
        if required:
            response = self.backend.complete(agent, request, cue)
        else:
            response = _try_complete(self.backend, agent, request, cue)
            if response is None or (response.kind == "text" and response.text.strip().lower() == "pass"):
                return None
        call = None
        if response.kind == "tool_call":
            call = response.tool
            for key, value in (defaults or {}).items():
                call.arguments.setdefault(key, value)
        elif text_to_call is not None:
            call = text_to_call(response.text)
            if call is None:
                return None
        payload: dict[str, Any] = {"iteration": iteration}
        if context:
            payload["context"] = context
        if call is not None:
            outcome = self.env.step(agent, call.name, call.arguments)
            payload.update(tool=call.name, arguments=call.arguments)
            if outcome.ok:
                payload["output"] = outcome.observation
            else:
                payload.update(output="", error=outcome.error)
                self.recorder.emit(
                    "invalid_call", actor=agent, audience=[agent],
                    iteration=iteration, tool=call.name, reason=outcome.error,
                )
            output = outcome.observation if outcome.ok else ""
        else:
            payload.update(tool=None, arguments={}, output=response.text)
            output = response.text
        self.recorder.emit("action", actor=agent, audience=[agent], **payload)
        self._actuals[agent] = output
        self.memory.remember(agent, f"iteration {iteration}: {output or payload.get('error', '')}", segment="short")
        return output

    def _iterate_star(self, iteration: int) -> None:
        planner = self.config.planners()[0].id
        actors = sorted(a.id for a in self.config.actors())
        record = self._plan_for(iteration, planner, actors)
        for agent in sorted(record.assignments):
            self.send_message(planner, agent, record.assignments[agent], iteration=iteration)
        self._actuals = {}
        for agent in actors:
            self._act(agent, iteration, context=record.assignments.get(agent, ""))
        for agent in actors:
            self.send_message(agent, planner, self._actuals.get(agent, ""), iteration=iteration)
        self._consolidate(iteration, planner)

    def _consolidate(self, iteration: int, planner: str) -> None:
        outputs = [f"{a}: {t}" for a, t in sorted(self._actuals.items())]
        request = CompletionRequest(
            messages=[{"speaker": "engine", "text": "Summarize this iteration's results:\n" + "\n".join(outputs)}],
        )
        response = _try_complete(self.backend, planner, request, f"consolidate:{iteration}")
        summary = response.text if response is not None and response.kind == "text" else "; ".join(outputs)
        self._summaries.append(summary)
        self.memory.remember(planner, f"iteration {iteration} summary: {summary}", segment="shared")
        self.recorder.emit(
            "consolidation", actor=planner, audience=[planner],
            iteration=iteration, summary=summary,
        )

    def _iterate_tree(self, iteration: int) -> None:
        parents = self.tree_parents()
        children: dict[str, list[str]] = {}
        for child, parent in parents.items():
            children.setdefault(parent, []).append(child)
        roots = [a.id for a in self.config.agents if a.id not in parents]
        if len(roots) != 1:
            raise ProtocolError(f"tree requires exactly one root, found {sorted(roots)}")
        root = roots[0]
        roles = {a.id: a.role for a in self.config.agents}
        if roles[root] is not AgentRole.PLANNER:
            raise ProtocolError("tree root must be a planner")
        self._actuals = {}
        # walk planners top-down; delegate to planner children, plan over actor children
        frontier = [root]
        while frontier:
            node = frontier.pop(0)
            planner_kids = sorted(k for k in children.get(node, []) if roles[k] is AgentRole.PLANNER)
            actor_kids = sorted(k for k in children.get(node, []) if roles[k] is AgentRole.ACTOR)
            if planner_kids:
                self._delegate(iteration, node, planner_kids)
                frontier.extend(planner_kids)
            if actor_kids:
                record = self._plan_for(iteration, node, actor_kids)
                for agent in sorted(record.assignments):
                    self.send_message(node, agent, record.assignments[agent], iteration=iteration)
                for agent in actor_kids:
                    self._act(agent, iteration, context=record.assignments.get(agent, ""))
                for agent in actor_kids:
                    self.send_message(agent, node, self._actuals.get(agent, ""), iteration=iteration)
            if node != root:
                report = "; ".join(f"{a}: {self._actuals.get(a, '')}" for a in actor_kids)
                self.send_message(node, parents[node], report or "no results", iteration=iteration)
        self._consolidate(iteration, root)

    def _delegate(self, iteration: int, planner: str, planner_kids: list[str]) -> None:
        request = CompletionRequest(
            messages=[{
                "speaker": "engine",
                "text": f"Task: {self._task()}\nDelegate a subtree task to each of: {', '.join(planner_kids)}\n"
                "Reply with one `planner_id: subtask` line per planner.",
            }]
        )
        response = _try_complete(self.backend, planner, request, f"delegate:{iteration}")
        if response is not None and response.kind == "text":
            assignments, _, _ = parse_plan_text(response.text, planner_kids)
        else:
            assignments = {}
        for kid in planner_kids:
            assignments.setdefault(kid, self._task())
        self.recorder.emit(
            "delegation", actor=planner, audience=[planner, *planner_kids],
            iteration=iteration, assignments=assignments,
        )
        for kid in sorted(assignments):
            self.send_message(planner, kid, assignments[kid], iteration=iteration)

    def _iterate_graph(self, iteration: int) -> None:
        actors = sorted(a.id for a in self.config.actors())
        for round_no in range(1, self.config.max_comm_iterations + 1):
            sent = False
            for agent in actors:
                request = CompletionRequest(
                    messages=[{
                        "speaker": "engine",
                        "text": f"Neighbors you may message: {', '.join(self.graph.neighbors(agent)) or 'none'}.\n"
                        "Reply `to <agent>: <text>` to send one message, or nothing to pass.",
                    }]
                )
                response = _try_complete(self.backend, agent, request, f"message:{iteration}:{round_no}")
                if response is None:
                    continue
                target, text = self._parse_message(response)
                if target is None:
                    continue
                self.send_message(agent, target, text, iteration=iteration, round=round_no)
                sent = True
            if not sent:
                break
        self._actuals = {}
        for agent in actors:
            for slot in self._action_slots(agent, iteration):
                self._act(
                    agent, iteration,
                    cue=slot["cue"], context=slot["context"], required=slot["required"],
                    text_to_call=slot.get("text_to_call"), defaults=slot.get("defaults"),
                )

    def _action_slots(self, agent: str, iteration: int) -> list[dict[str, Any]]:
        provider = getattr(self.env, "action_slots", None)
        if provider is not None:
            return provider(agent, iteration)
        return [{"cue": f"act:{iteration}", "context": "", "required": True}]

    @staticmethod
    def _parse_message(response: CompletionResponse) -> tuple[Optional[str], str]:
        if response.kind == "tool_call" and response.tool.name == "send_message":
            args = response.tool.arguments
            return args.get("to"), str(args.get("text", ""))
        text = response.text.strip()
        match = re.match(r"^to\s+(?P<id>[A-Za-z0-9_.\-]+)\s*:\s*(?P<text>.*)$", text, re.IGNORECASE)
        if match:
            return match.group("id"), match.group("text")
        return None, ""

    def _iterate_chain(self, iteration: int) -> None:
        actors = [a.id for a in self.config.actors()]  # declared sequence
        previous = self._last_chain_output or self._task()
        for agent in actors:
            output = self._act(agent, iteration, context=previous)
            previous = output if output is not None else previous
        self._last_chain_output = previous


def run(config: RunConfig, env: Environment, backend) -> RunRecord:
    """Execute one full run and return its record."""
    return Engine(config, env, backend).run()
