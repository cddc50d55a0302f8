"""Evaluation harness: milestone KPI, judge-based scores, task scores, correlations.

The judge prompts live as text templates under marble/prompts/ and are filled
by literal placeholder substitution, never reformatted, so the emitted prompt
is byte-identical to the template modulo the declared placeholders. Judge
replies must carry a fenced ```json {"score": k}``` block; anything else is
retried and then surfaced as an error, never silently defaulted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional, Sequence

from scipy import stats

from .backend import CompletionRequest
from .errors import JudgeError, MetricError
from .records import RunRecord

TASK_TRUNCATE_LIMIT = 2000
PRESENTATION_FACTOR = 20.0


# --------------------------------------------------------------------------
# milestones and KPI


@dataclass
class MilestoneRecord:
    iteration: int
    achieved: bool
    milestone_type: str = ""
    contributing_agents: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.achieved:
            if self.milestone_type or self.contributing_agents:
                raise MetricError("unachieved milestone must carry no type and no contributors")
        elif len(self.contributing_agents) > 3:
            raise MetricError("an achieved milestone lists at most 3 core contributors")


@dataclass
class MilestonePlan:
    entries: list[dict[str, str]]  # {name, objective, tasks, expected_outcome}

    def __post_init__(self):
        names = [e["name"] for e in self.entries]
        if len(names) != len(set(names)):
            raise MetricError("milestone names must be unique")

    def __len__(self) -> int:
        return len(self.entries)


def compute_kpi(records: Sequence[MilestoneRecord], agents: Sequence[str], total_milestones: int) -> float:
    """Mean over agents of (milestones contributed to) / total_milestones."""
    if total_milestones < 1:
        raise MetricError("total_milestones must be >= 1")
    if not agents:
        raise MetricError("agent list must be non-empty")
    known = set(agents)
    counts = dict.fromkeys(agents, 0)
    for record in records:
        if not record.achieved:
            continue
        for contributor in record.contributing_agents:
            if contributor not in known:
                raise MetricError(f"contributor {contributor!r} is not a known agent")
            counts[contributor] += 1
    n = len(agents)
    return sum(counts.values()) / (n * total_milestones)


# --------------------------------------------------------------------------
# prompt templates


def _load_template(name: str) -> str:
    return resources.files("marble.prompts").joinpath(name).read_text(encoding="utf-8")


def _fill(template: str, substitutions: dict[str, str]) -> str:
    # literal token replacement; str.format would trip on the JSON braces
    for token, value in substitutions.items():
        template = template.replace("{" + token + "}", value)
    return template


def truncate_text(text: str, limit: int = TASK_TRUNCATE_LIMIT) -> str:
    if len(text) <= limit:
        return text
    return text[: limit - 3] + "..."


def communication_prompt(
    task: str,
    agent_profiles: str,
    relationship: str,
    task_results_all: str,
    communications_all: str,
) -> str:
    return _fill(_load_template("communication_eval.txt"), {
        "truncate_text(task)": truncate_text(task),
        "agent_profiles": agent_profiles,
        "relationship": relationship,
        "task_results_all": task_results_all,
        "communications_all": communications_all,
    })


def planning_prompt(agent_profiles: str, planning_all: str) -> str:
    return _fill(_load_template("planning_eval.txt"), {
        "agent_profiles": agent_profiles,
        "planning_all": planning_all,
    })


def milestone_prompt(
    task: str,
    iteration_index: int,
    prev_summary: str,
    current_summary: str,
    current_task_results: str,
) -> str:
    return _fill(_load_template("milestone_kpi.txt"), {
        "task": task,
        "iteration_index": str(iteration_index),
        "prev_summary": prev_summary,
        "current_summary": current_summary,
        "current_task_results": current_task_results,
    })


# --------------------------------------------------------------------------
# judge plumbing

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def parse_fenced_json(text: str) -> dict[str, Any]:
    """Extract the first fenced JSON object from judge output."""
    for match in _FENCE_RE.finditer(text):
        try:
            obj = json.loads(match.group(1))
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise JudgeError("no parseable fenced JSON block in judge output")


def parse_score_block(text: str) -> int:
    obj = parse_fenced_json(text)
    score = obj.get("score")
    if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
        raise JudgeError(f"judge score must be an integer in 1..5, got {score!r}")
    return score


JUDGE_AGENT = "judge"
JUDGE_ATTEMPTS = 3


def _call_judge(judge_backend, prompt: str, cue: str, parser):
    last_error: Optional[Exception] = None
    for _ in range(JUDGE_ATTEMPTS):
        response = judge_backend.complete(
            JUDGE_AGENT, CompletionRequest(messages=[{"speaker": "engine", "text": prompt}]), cue,
        )
        if response.kind != "text":
            last_error = JudgeError("judge replied with a tool call")
            continue
        try:
            return parser(response.text)
        except JudgeError as exc:
            last_error = exc
    raise JudgeError(f"judge output unparseable after {JUDGE_ATTEMPTS} attempts: {last_error}")


def judge(kind: str, inputs: dict[str, str], judge_backend) -> int:
    """Score communication or planning on the 1-5 rubric.

    Communication with no aggregated data scores 0 without consulting the
    judge at all.
    """
    if kind == "communication":
        if not inputs.get("communications_all", "").strip():
            return 0
        prompt = communication_prompt(
            task=inputs.get("task", ""),
            agent_profiles=inputs.get("agent_profiles", ""),
            relationship=inputs.get("relationship", ""),
            task_results_all=inputs.get("task_results_all", ""),
            communications_all=inputs["communications_all"],
        )
        cue = "judge:communication"
    elif kind == "planning":
        prompt = planning_prompt(
            agent_profiles=inputs.get("agent_profiles", ""),
            planning_all=inputs.get("planning_all", ""),
        )
        cue = "judge:planning"
    else:
        raise MetricError(f"unknown judge kind {kind!r}")
    return _call_judge(judge_backend, prompt, cue, parse_score_block)


def detect_milestone(
    iteration: int,
    inputs: dict[str, str],
    judge_backend,
) -> MilestoneRecord:
    """One milestone judgement for one iteration, via the KPI prompt."""
    prompt = milestone_prompt(
        task=inputs.get("task", ""),
        iteration_index=iteration,
        prev_summary=inputs.get("prev_summary", ""),
        current_summary=inputs.get("current_summary", ""),
        current_task_results=inputs.get("current_task_results", ""),
    )

    def parser(text: str) -> MilestoneRecord:
        try:
            obj = parse_fenced_json(text)
        except JudgeError:
            # the KPI prompt asks for bare JSON, not a fenced block
            start, end = text.find("{"), text.rfind("}")
            if start == -1 or end <= start:
                raise
            try:
                obj = json.loads(text[start:end + 1])
            except json.JSONDecodeError as exc:
                raise JudgeError(f"milestone output is not JSON: {exc}") from exc
        achieved = bool(obj.get("milestone_achieved"))
        contributors = [str(a) for a in obj.get("contributing_agents", [])] if achieved else []
        return MilestoneRecord(
            iteration=iteration,
            achieved=achieved,
            milestone_type=str(obj.get("milestone_type", "")) if achieved else "",
            contributing_agents=contributors[:3],
        )

    return _call_judge(judge_backend, prompt, f"milestone:{iteration}", parser)


class FixedScoreJudge:
    """Degenerate judge for plumbing runs: always the same rubric score."""

    def __init__(self, score: int = 3):
        self.score = score

    def complete(self, agent, request, cue):
        from .backend import CompletionResponse

        return CompletionResponse(kind="text", text=f'```json\n{{"score": {self.score}}}\n```')


# --------------------------------------------------------------------------
# scores and presentation


def scale_presentation(score: float) -> float:
    """Map a 0-5 rubric score onto the 0-100 presentation scale."""
    return score * PRESENTATION_FACTOR


def coordination_score(comm_score: float, plan_score: float) -> float:
    return (comm_score + plan_score) / 2.0


def werewolf_task_score(partial_ratios, win_rate: float) -> float:
    """Mean of the scaled daily completion ratio and the scaled win rate."""
    if isinstance(partial_ratios, (int, float)):
        partial_ratios = [float(partial_ratios)]
    if not partial_ratios:
        raise MetricError("at least one completion ratio required")
    if not 0.0 <= win_rate <= 1.0:
        raise MetricError(f"win_rate must be in [0, 1], got {win_rate}")
    mean_ratio = sum(partial_ratios) / len(partial_ratios)
    return (mean_ratio * 100.0 + win_rate * 100.0) / 2.0


@dataclass
class MetricReport:
    kpi: float
    comm_score: float
    plan_score: float
    task_score: Optional[float] = None

    @property
    def cs(self) -> float:
        return coordination_score(self.comm_score, self.plan_score)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kpi": self.kpi,
            "comm": self.comm_score,
            "plan": self.plan_score,
            "cs": self.cs,
            "ts": self.task_score,
            "scaled": {
                "comm": scale_presentation(self.comm_score),
                "plan": scale_presentation(self.plan_score),
                "cs": scale_presentation(self.cs),
            },
        }


# --------------------------------------------------------------------------
# correlations


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    # single square root keeps perfectly linear integer data at exactly +/-1
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = (sum((x - mx) ** 2 for x in xs) * sum((y - my) ** 2 for y in ys)) ** 0.5
    return num / den


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def correlations(xs: Sequence[float], ys: Sequence[float]) -> dict[str, float]:
    """Sample Pearson, Spearman (average ranks on ties), and Kendall tau-b."""
    if len(xs) != len(ys):
        raise MetricError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise MetricError("need at least two observations")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise MetricError("correlation undefined for constant input")
    pearson = _pearson(xs, ys)
    spearman = _pearson(_average_ranks(xs), _average_ranks(ys))
    kendall = stats.kendalltau(xs, ys, variant="b").statistic
    return {"pearson": pearson, "spearman": spearman, "kendall": float(kendall)}


# --------------------------------------------------------------------------
# extracting judge inputs from a run record


def collect_communication_data(record: RunRecord) -> str:
    """Messages, discussion contributions, and public speeches, in log order."""
    lines = []
    for event in record.events:
        if event.kind == "message":
            lines.append(f"From {event.actor} to {event.payload.get('to')}: {event.payload.get('text', '')}")
        elif event.kind == "discussion":
            lines.append(f"[discussion r{event.payload.get('round')}] {event.actor}: {event.payload.get('text', '')}")
        elif event.kind == "speech":
            lines.append(f"[day {event.payload.get('day')}] {event.actor}: {event.payload.get('text', '')}")
        elif event.kind == "decision" and event.payload.get("tool") == "day_speech":
            lines.append(f"[day {event.payload.get('day')}] {event.actor}: {event.payload.get('arguments', {}).get('text', '')}")
        elif event.kind == "negotiation_action" and event.payload.get("action") in (
            "provide_information", "inquire_intentions",
        ):
            lines.append(f"[{event.payload.get('session')}] {event.actor}: {event.payload.get('text', '')}")
    return "\n".join(lines)


def collect_planning_data(record: RunRecord) -> str:
    lines = []
    for event in record.events:
        if event.kind == "plan":
            assignments = event.payload.get("assignments", {})
            joined = "; ".join(f"{a}: {t}" for a, t in sorted(assignments.items()))
            lines.append(f"[iteration {event.payload.get('iteration')}] {event.actor} planned: {joined}")
        elif event.kind == "delegation":
            assignments = event.payload.get("assignments", {})
            joined = "; ".join(f"{a}: {t}" for a, t in sorted(assignments.items()))
            lines.append(f"[iteration {event.payload.get('iteration')}] {event.actor} delegated: {joined}")
    return "\n".join(lines)


def collect_task_results(record: RunRecord) -> str:
    lines = []
    for event in record.events:
        if event.kind == "action":
            output = event.payload.get("output", "")
            if output:
                lines.append(f"{event.actor}: {output}")
        elif event.kind == "run_end":
            lines.append(f"summary: {json.dumps(event.payload.get('summary', {}), sort_keys=True)}")
    return "\n".join(lines)


def iteration_summaries(record: RunRecord) -> dict[int, str]:
    """Per-iteration digests used as milestone-detection context."""
    summaries: dict[int, list[str]] = {}
    current = 0
    for event in record.events:
        if event.kind == "iteration_start":
            current = event.payload.get("iteration", current + 1)
            summaries.setdefault(current, [])
        elif event.kind in ("action", "consolidation", "decision", "negotiation_action") and current:
            bits = summaries.setdefault(current, [])
            if event.kind == "action":
                bits.append(f"{event.actor} -> {event.payload.get('output', '')}")
            elif event.kind == "consolidation":
                bits.append(f"summary: {event.payload.get('summary', '')}")
            elif event.kind == "negotiation_action":
                bits.append(f"{event.actor} {event.payload.get('action')}")
            else:
                bits.append(f"{event.actor} {event.payload.get('tool')}")
    return {i: "\n".join(lines) for i, lines in summaries.items()}


def agent_profiles_text(config_snapshot: dict[str, Any]) -> str:
    agents = config_snapshot.get("agents", [])
    return "\n".join(f"- {a.get('id')}: {a.get('profile', '')}" for a in agents)


def relationship_text(config_snapshot: dict[str, Any]) -> str:
    relations = config_snapshot.get("relations", [])
    return "\n".join(f"{r.get('from')} {r.get('kind')} {r.get('to')}" for r in relations)


def evaluate_record(
    record: RunRecord,
    judge_backend,
    detect_milestones: bool = False,
    total_milestones: Optional[int] = None,
) -> MetricReport:
    """Recompute the full metric report for a finished run record."""
    snapshot = record.config_snapshot or {}
    task = str(snapshot.get("scenario", {}).get("task", "")) if isinstance(snapshot.get("scenario"), dict) else ""
    inputs = {
        "task": task,
        "agent_profiles": agent_profiles_text(snapshot),
        "relationship": relationship_text(snapshot),
        "task_results_all": collect_task_results(record),
        "communications_all": collect_communication_data(record),
        "planning_all": collect_planning_data(record),
    }
    comm = judge("communication", inputs, judge_backend)
    plan = judge("planning", inputs, judge_backend)
    agents = [a.get("id") for a in snapshot.get("agents", [])]
    kpi = 0.0
    if detect_milestones and agents:
        summaries = iteration_summaries(record)
        total = total_milestones or snapshot.get("max_iterations", len(summaries)) or 1
        milestone_records = []
        prev = ""
        for iteration in sorted(summaries):
            current = summaries[iteration]
            milestone_records.append(detect_milestone(
                iteration,
                {
                    "task": task,
                    "prev_summary": prev,
                    "current_summary": current,
                    "current_task_results": current,
                },
                judge_backend,
            ))
            prev = current
        kpi = compute_kpi(milestone_records, agents, total)
    task_score = _scenario_task_score(record)
    return MetricReport(kpi=kpi, comm_score=float(comm), plan_score=float(plan), task_score=task_score)


def _scenario_task_score(record: RunRecord) -> Optional[float]:
    """Rule-based per-run task result where the scenario defines one."""
    for event in reversed(record.events):
        if event.kind == "run_end":
            summary = event.payload.get("summary", {})
            if "partial" in summary:
                return float(summary["partial"].get("completion_ratio", 0.0))
            if "deal_rate" in summary:
                return float(summary["deal_rate"])
            if "result_score" in summary and summary.get("winner") is not None:
                return float(summary["result_score"])
            return None
    return None
