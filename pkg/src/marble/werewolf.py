"""Social-deduction game: roles, night/day phase machine, scoring, archives.

All communication is environment-mediated: the game publishes decision
requests (guard, wolf votes, seer, witch, election, speeches, votes, badge
passes) one at a time and relays outcomes, so no agent talks out of turn.
Every ledger change is logged as a score event citing exactly one scoring-rule
row, which makes the final ledgers auditable from the event log alone.

Two simulation modes: a full game runs night/day cycles until one camp is
eliminated; a partial-day run starts from an archived day boundary, issues
the daily task list, plays exactly one day-night cycle, and reports the task
completion ratio against the fixed 5-point maximum.
"""

from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .environment import ActionOutcome, DecisionRequest, Environment, ToolParam, ToolSchema, drive_mediated
from .errors import RuleError
from .records import EventRecorder, canonical_json


class Role(str, Enum):
    WEREWOLF = "werewolf"
    VILLAGER = "villager"
    SEER = "seer"
    WITCH = "witch"
    GUARD = "guard"


VILLAGER_CAMP = {Role.VILLAGER, Role.SEER, Role.WITCH, Role.GUARD}
KEY_ROLES = {Role.SEER, Role.GUARD, Role.WITCH}

# balanced default: 3 wolves, seer, witch, guard, 3 villagers (9 seats)
DEFAULT_COMPOSITION = [
    Role.WEREWOLF, Role.WEREWOLF, Role.WEREWOLF,
    Role.SEER, Role.WITCH, Role.GUARD,
    Role.VILLAGER, Role.VILLAGER, Role.VILLAGER,
]


class ScoreRow(Enum):
    """One member per row of the faction scoring table.

    The rule text keeps every value distinct; equal (faction, points) pairs
    would otherwise alias into a single enum member.
    """

    VILLAGER_SHERIFF_ELECTED = ("villager", 2.0, "villager candidate elected as sheriff")
    GUARD_PROTECTED_TARGET = ("villager", 2.0, "guard successfully protects a target from attack")
    WITCH_SAVED_TARGET = ("villager", 2.0, "witch successfully saves a target from attack")
    WITCH_POISONED_WEREWOLF = ("villager", 2.0, "witch uses poison to kill a werewolf")
    WEREWOLF_VOTED_OUT = ("villager", 2.0, "werewolf is voted out during the day")
    VOTED_FOR_WEREWOLF = ("villager", 0.2, "villager votes for a werewolf")
    VOTED_FOR_VILLAGER = ("villager", -0.1, "villager votes for a villager")
    WITCH_POISONED_VILLAGER = ("villager", -2.0, "witch uses poison to kill a villager")
    SEER_SURVIVED_DAY = ("villager", 1.0, "seer survives an additional day from the second on")
    WEREWOLF_SHERIFF_ELECTED = ("werewolf", 2.0, "werewolf candidate elected as sheriff")
    WEREWOLVES_CHOSE_TARGET = ("werewolf", 1.0, "werewolves successfully choose an attack target")
    VILLAGER_VOTED_OUT = ("werewolf", 1.0, "a villager is voted out during the day")

    @property
    def faction(self) -> str:
        return self.value[0]

    @property
    def points(self) -> float:
        return self.value[1]

    @property
    def rule(self) -> str:
        return self.value[2]


class TaskKind(str, Enum):
    PROTECT_SEER = "protect_seer"
    EXILE_WEREWOLF = "exile_werewolf"
    RESCUE_VILLAGER = "rescue_villager"
    POISON_WEREWOLF = "poison_werewolf"


TASK_REWARDS = {
    TaskKind.PROTECT_SEER: 1.0,
    TaskKind.EXILE_WEREWOLF: 2.0,
    TaskKind.RESCUE_VILLAGER: 2.0,
    TaskKind.POISON_WEREWOLF: 2.0,
}
RESCUE_KEY_ROLE_BONUS = 1.0
DAILY_TASK_MAX = 5.0  # theoretical per-cycle maximum, rescue bonus excluded


@dataclass
class DailyTask:
    kind: TaskKind
    reward: float
    completed: bool = False
    bonus_applied: bool = False

    @classmethod
    def issue(cls, kind: TaskKind) -> "DailyTask":
        return cls(kind=kind, reward=TASK_REWARDS[kind])


@dataclass
class Seat:
    agent: str
    role: Role
    alive: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {"agent": self.agent, "role": self.role.value, "alive": self.alive}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Seat":
        return cls(data["agent"], Role(data["role"]), data["alive"])


@dataclass
class WerewolfState:
    seats: list[Seat]
    day: int = 1
    phase: str = "night"  # night | day | ended
    sheriff: Optional[str] = None
    pending_badge_from: Optional[str] = None
    witch_antidote: bool = True
    witch_poison: bool = True
    villager_points: float = 0.0
    werewolf_points: float = 0.0
    last_night_deaths: list[str] = field(default_factory=list)
    winner: Optional[str] = None

    def seat(self, agent: str) -> Seat:
        for seat in self.seats:
            if seat.agent == agent:
                return seat
        raise RuleError(f"unknown seat {agent!r}")

    def alive_seats(self) -> list[Seat]:
        return [s for s in self.seats if s.alive]

    def alive_with_role(self, role: Role) -> list[Seat]:
        return [s for s in self.seats if s.alive and s.role is role]

    def living_wolves(self) -> list[str]:
        return [s.agent for s in self.alive_seats() if s.role is Role.WEREWOLF]

    def living_villager_camp(self) -> list[str]:
        return [s.agent for s in self.alive_seats() if s.role in VILLAGER_CAMP]

    def everyone(self) -> list[str]:
        return [s.agent for s in self.seats]

    def net_score(self) -> float:
        return self.villager_points - self.werewolf_points

    def result_score(self) -> int:
        return len(self.living_villager_camp()) - len(self.living_wolves())

    def to_dict(self) -> dict[str, Any]:
        return {
            "seats": [s.to_dict() for s in self.seats],
            "day": self.day,
            "phase": self.phase,
            "sheriff": self.sheriff,
            "pending_badge_from": self.pending_badge_from,
            "witch_antidote": self.witch_antidote,
            "witch_poison": self.witch_poison,
            "villager_points": self.villager_points,
            "werewolf_points": self.werewolf_points,
            "last_night_deaths": list(self.last_night_deaths),
            "winner": self.winner,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "WerewolfState":
        return cls(
            seats=[Seat.from_dict(s) for s in data["seats"]],
            day=data["day"],
            phase=data["phase"],
            sheriff=data["sheriff"],
            pending_badge_from=data.get("pending_badge_from"),
            witch_antidote=data["witch_antidote"],
            witch_poison=data["witch_poison"],
            villager_points=data["villager_points"],
            werewolf_points=data["werewolf_points"],
            last_night_deaths=list(data.get("last_night_deaths", [])),
            winner=data.get("winner"),
        )

    @classmethod
    def new_game(cls, roster: list[tuple[str, Role]]) -> "WerewolfState":
        return cls(seats=[Seat(agent, role) for agent, role in roster])


@dataclass
class WitchChoice:
    save: bool = False
    poison_target: Optional[str] = None


@dataclass
class NightDecisions:
    guard_target: Optional[str] = None
    wolf_votes: dict[str, str] = field(default_factory=dict)
    seer_target: Optional[str] = None
    witch_choice: WitchChoice = field(default_factory=WitchChoice)


def _score(state: WerewolfState, recorder: EventRecorder, row: ScoreRow, **detail) -> None:
    if row.faction == "villager":
        state.villager_points += row.points
    else:
        state.werewolf_points += row.points
    recorder.emit("score", actor="env", row=row.name, faction=row.faction, points=row.points, **detail)


def check_win(state: WerewolfState) -> str:
    """'villagers_win' when no wolf lives, 'werewolves_win' when no villager-camp
    seat lives, else 'ongoing'. A 1v1 stays ongoing; the day vote settles it."""
    if not state.living_wolves():
        return "villagers_win"
    if not state.living_villager_camp():
        return "werewolves_win"
    return "ongoing"


def wolf_final_target(state: WerewolfState, wolf_votes: dict[str, str]) -> Optional[str]:
    """Majority target; ties break toward the earliest seat in roster order."""
    if not wolf_votes:
        return None
    counts: dict[str, int] = {}
    for target in wolf_votes.values():
        counts[target] = counts.get(target, 0) + 1
    best = max(counts.values())
    for seat in state.seats:
        if counts.get(seat.agent) == best:
            return seat.agent
    return None


def _require_alive(state: WerewolfState, agent: str, label: str) -> Seat:
    seat = state.seat(agent)
    if not seat.alive:
        raise RuleError(f"{label} {agent!r} is dead")
    return seat


def resolve_night(
    state: WerewolfState,
    decisions: NightDecisions,
    recorder: Optional[EventRecorder] = None,
) -> WerewolfState:
    """Resolve one night in guard -> werewolves -> seer -> witch order.

    The wolf attack fails if the target was guarded or saved by the antidote;
    poison kills regardless of the guard. All validation happens before any
    mutation so a rule error leaves the state untouched.
    """
    recorder = recorder if recorder is not None else EventRecorder()
    if state.phase != "night":
        raise RuleError(f"resolve_night in phase {state.phase!r}")
    choice = decisions.witch_choice
    attack_target = wolf_final_target(state, decisions.wolf_votes)
    if choice.save and choice.poison_target is not None:
        raise RuleError("witch cannot use both potions in one night")
    if decisions.guard_target is not None:
        if not state.alive_with_role(Role.GUARD):
            raise RuleError("guard decision without a living guard")
        _require_alive(state, decisions.guard_target, "guard target")
    for wolf, target in decisions.wolf_votes.items():
        voter = _require_alive(state, wolf, "wolf")
        if voter.role is not Role.WEREWOLF:
            raise RuleError(f"wolf vote by non-wolf {wolf!r}")
        _require_alive(state, target, "wolf target")
    if decisions.seer_target is not None:
        if not state.alive_with_role(Role.SEER):
            raise RuleError("seer decision without a living seer")
        _require_alive(state, decisions.seer_target, "seer target")
    if choice.save or choice.poison_target is not None:
        if not state.alive_with_role(Role.WITCH):
            raise RuleError("witch decision without a living witch")
        if choice.save:
            if not state.witch_antidote:
                raise RuleError("antidote already used")
            if attack_target is None:
                raise RuleError("no attack to save against")
        if choice.poison_target is not None:
            if not state.witch_poison:
                raise RuleError("poison already used")
            _require_alive(state, choice.poison_target, "poison target")

    if attack_target is not None:
        _score(state, recorder, ScoreRow.WEREWOLVES_CHOSE_TARGET, target=attack_target)
        recorder.emit(
            "wolf_attack", actor="env", audience=state.living_wolves(),
            target=attack_target, day=state.day,
        )

    if decisions.seer_target is not None:
        seer = state.alive_with_role(Role.SEER)[0].agent
        verdict = "werewolf" if state.seat(decisions.seer_target).role is Role.WEREWOLF else "not a werewolf"
        recorder.emit(
            "seer_result", actor="env", audience=[seer],
            night=state.day, target=decisions.seer_target, result=verdict,
        )

    guarded = attack_target is not None and decisions.guard_target == attack_target
    saved = False
    if choice.save:
        state.witch_antidote = False
        saved = True
        _score(state, recorder, ScoreRow.WITCH_SAVED_TARGET, target=attack_target)
    if guarded:
        _score(state, recorder, ScoreRow.GUARD_PROTECTED_TARGET, target=attack_target)

    deaths: list[str] = []
    attack_success = attack_target is not None and not guarded and not saved
    if attack_target is not None:
        recorder.emit(
            "attack_result", actor="env", audience=state.living_wolves(),
            target=attack_target, success=attack_success, day=state.day,
        )
    if attack_success:
        deaths.append(attack_target)

    if choice.poison_target is not None:
        state.witch_poison = False
        victim = state.seat(choice.poison_target)
        if victim.role is Role.WEREWOLF:
            _score(state, recorder, ScoreRow.WITCH_POISONED_WEREWOLF, target=victim.agent)
        else:
            _score(state, recorder, ScoreRow.WITCH_POISONED_VILLAGER, target=victim.agent)
        if victim.agent not in deaths:
            deaths.append(victim.agent)

    order = {seat.agent: idx for idx, seat in enumerate(state.seats)}
    deaths.sort(key=order.__getitem__)
    for name in deaths:
        state.seat(name).alive = False
    state.last_night_deaths = deaths
    if state.sheriff is not None and not state.seat(state.sheriff).alive:
        state.pending_badge_from = state.sheriff
        state.sheriff = None

    state.phase = "day"
    verdict = check_win(state)
    if verdict != "ongoing":
        _finish_game(state, recorder, verdict)
    return state


def resolve_election(
    state: WerewolfState,
    candidates: list[str],
    votes: dict[str, Optional[str]],
    recorder: Optional[EventRecorder] = None,
) -> Optional[str]:
    """Plurality election; ties go to the earliest declared candidate."""
    recorder = recorder if recorder is not None else EventRecorder()
    live_candidates = [c for c in candidates if state.seat(c).alive]
    if not live_candidates:
        recorder.emit("election", actor="env", audience=state.everyone(), candidates=[], elected=None)
        return None
    counts = {c: 0.0 for c in live_candidates}
    for voter, candidate in votes.items():
        _require_alive(state, voter, "election voter")
        if candidate in counts:
            counts[candidate] += 1.0
    best = max(counts.values())
    elected = next(c for c in live_candidates if counts[c] == best)
    state.sheriff = elected
    if state.seat(elected).role is Role.WEREWOLF:
        _score(state, recorder, ScoreRow.WEREWOLF_SHERIFF_ELECTED, agent=elected)
    else:
        _score(state, recorder, ScoreRow.VILLAGER_SHERIFF_ELECTED, agent=elected)
    recorder.emit(
        "election", actor="env", audience=state.everyone(),
        candidates=live_candidates, elected=elected,
    )
    return elected


def resolve_badge(state: WerewolfState, choice: Optional[str], recorder: Optional[EventRecorder] = None) -> None:
    """The dying sheriff passes the badge to a living player or discards it."""
    recorder = recorder if recorder is not None else EventRecorder()
    holder = state.pending_badge_from
    if holder is None:
        raise RuleError("no badge pass pending")
    if choice is not None and not state.seat(choice).alive:
        raise RuleError(f"badge successor {choice!r} is dead")
    state.pending_badge_from = None
    if choice is None:
        recorder.emit("badge_discarded", actor=holder, audience=state.everyone(), by=holder)
        return
    state.sheriff = choice
    recorder.emit("badge_passed", actor=holder, audience=state.everyone(), to=choice)


def resolve_banishment(
    state: WerewolfState,
    votes: dict[str, Optional[str]],
    recorder: Optional[EventRecorder] = None,
) -> Optional[str]:
    """Weighted day vote: sheriff counts 1.5, everyone else 1.0; tie banishes no one."""
    recorder = recorder if recorder is not None else EventRecorder()
    for voter, target in votes.items():
        _require_alive(state, voter, "voter")
        if target is not None:
            _require_alive(state, target, "vote target")
    totals: dict[str, float] = {}
    for seat in state.seats:  # roster order keeps score events deterministic
        if seat.agent not in votes:
            continue
        target = votes[seat.agent]
        if target is None:
            continue
        weight = 1.5 if seat.agent == state.sheriff else 1.0
        totals[target] = totals.get(target, 0.0) + weight
        if seat.role in VILLAGER_CAMP:
            if state.seat(target).role is Role.WEREWOLF:
                _score(state, recorder, ScoreRow.VOTED_FOR_WEREWOLF, voter=seat.agent, target=target)
            else:
                _score(state, recorder, ScoreRow.VOTED_FOR_VILLAGER, voter=seat.agent, target=target)
    recorder.emit("vote_tally", actor="env", audience=state.everyone(), day=state.day,
                  totals={k: totals[k] for k in sorted(totals)})
    if not totals:
        return None
    best = max(totals.values())
    leaders = [t for t, v in totals.items() if v == best]
    if len(leaders) > 1:
        recorder.emit("banish_tie", actor="env", audience=state.everyone(), day=state.day, tied=sorted(leaders))
        return None
    banished = leaders[0]
    seat = state.seat(banished)
    seat.alive = False
    recorder.emit(
        "banished", actor="env", audience=state.everyone(),
        day=state.day, agent=banished, role=seat.role.value,
    )
    if seat.role is Role.WEREWOLF:
        _score(state, recorder, ScoreRow.WEREWOLF_VOTED_OUT, agent=banished)
    else:
        _score(state, recorder, ScoreRow.VILLAGER_VOTED_OUT, agent=banished)
    if banished == state.sheriff:
        state.pending_badge_from = banished
        state.sheriff = None
    return banished


def _end_day(state: WerewolfState, recorder: EventRecorder) -> None:
    """Seer survival bonus, win check, and the transition into the next night."""
    if state.day >= 2 and state.alive_with_role(Role.SEER):
        _score(state, recorder, ScoreRow.SEER_SURVIVED_DAY, day=state.day)
    verdict = check_win(state)
    if verdict != "ongoing":
        _finish_game(state, recorder, verdict)
        return
    state.phase = "night"
    state.day += 1
    state.last_night_deaths = []


def _finish_game(state: WerewolfState, recorder: EventRecorder, verdict: str) -> None:
    state.phase = "ended"
    state.winner = "villagers" if verdict == "villagers_win" else "werewolves"
    recorder.emit(
        "game_over", actor="env", audience=state.everyone(),
        winner=state.winner, result_score=state.result_score(), net_score=state.net_score(),
    )


def resolve_day(
    state: WerewolfState,
    speeches: dict[str, str],
    votes: dict[str, Optional[str]],
    election: Optional[dict[str, Any]] = None,
    badge_choice: Optional[str] = None,
    post_badge_choice: Optional[str] = None,
    recorder: Optional[EventRecorder] = None,
) -> WerewolfState:
    """Resolve one full day: election (day 1 only) -> reveal -> badge flow ->
    speeches -> banishment vote -> badge flow again if needed -> day end."""
    recorder = recorder if recorder is not None else EventRecorder()
    if state.phase != "day":
        raise RuleError(f"resolve_day in phase {state.phase!r}")
    if election is not None and state.day == 1:
        resolve_election(state, election.get("candidates", []), election.get("votes", {}), recorder)
    recorder.emit(
        "deaths_revealed", actor="env", audience=state.everyone(),
        day=state.day, deaths=list(state.last_night_deaths),
    )
    if state.pending_badge_from is not None:
        resolve_badge(state, badge_choice, recorder)
    for seat in state.seats:
        if seat.agent in speeches:
            if not seat.alive:
                raise RuleError(f"speech by dead seat {seat.agent!r}")
            recorder.emit(
                "speech", actor=seat.agent, audience=state.everyone(),
                day=state.day, text=speeches[seat.agent],
            )
    resolve_banishment(state, votes, recorder)
    if state.pending_badge_from is not None and check_win(state) == "ongoing":
        resolve_badge(state, post_badge_choice, recorder)
    _end_day(state, recorder)
    return state


def issue_daily_tasks(state: WerewolfState) -> list[DailyTask]:
    """Tasks relevant to the current game state, in fixed kind order."""
    tasks = []
    if state.alive_with_role(Role.SEER):
        tasks.append(DailyTask.issue(TaskKind.PROTECT_SEER))
    if state.living_wolves():
        tasks.append(DailyTask.issue(TaskKind.EXILE_WEREWOLF))
    witch_alive = bool(state.alive_with_role(Role.WITCH))
    if witch_alive and state.witch_antidote:
        tasks.append(DailyTask.issue(TaskKind.RESCUE_VILLAGER))
    if witch_alive and state.witch_poison:
        tasks.append(DailyTask.issue(TaskKind.POISON_WEREWOLF))
    return tasks


# --------------------------------------------------------------------------
# archives


@dataclass
class GameArchive:
    """State snapshot at a night boundary plus the event history to that point."""

    roster: list[tuple[str, str]]  # (agent, role) at game start
    boundary: dict[str, Any]  # {"phase": "night"|"day", "day": k}
    state: dict[str, Any]
    events: list[dict[str, Any]]
    seed: int = 0

    def to_json(self) -> str:
        return canonical_json({
            "format": "werewolf-archive/1",
            "roster": [[a, r] for a, r in self.roster],
            "boundary": self.boundary,
            "seed": self.seed,
            "state": self.state,
            "events": self.events,
        }) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GameArchive":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RuleError(f"corrupt archive: {exc}") from exc
        if data.get("format") != "werewolf-archive/1":
            raise RuleError(f"not a werewolf archive: format={data.get('format')!r}")
        return cls(
            roster=[(a, r) for a, r in data["roster"]],
            boundary=data["boundary"],
            state=data["state"],
            events=data["events"],
            seed=data.get("seed", 0),
        )

    @classmethod
    def fresh(cls, roster: list[tuple[str, Role]], seed: int = 0) -> "GameArchive":
        """Archive at the very start: the first night is about to begin."""
        state = WerewolfState.new_game(roster)
        return cls(
            roster=[(a, r.value) for a, r in roster],
            boundary={"phase": "night", "day": 1},
            state=state.to_dict(),
            events=[],
            seed=seed,
        )

    def load_state(self) -> WerewolfState:
        return WerewolfState.from_dict(self.state)

    def initial_roster(self) -> list[tuple[str, Role]]:
        return [(a, Role(r)) for a, r in self.roster]


# --------------------------------------------------------------------------
# the mediated environment


def _parse_witch_text(text: str) -> dict[str, Any]:
    words = text.strip().split()
    if not words or words[0].lower() in ("none", "pass", "skip"):
        return {"action": "none"}
    if words[0].lower() == "save":
        return {"action": "save"}
    if words[0].lower() == "poison" and len(words) > 1:
        return {"action": "poison", "target": words[1]}
    return {"action": "none"}


def _parse_target_text(text: str) -> dict[str, Any]:
    cleaned = text.strip()
    if cleaned.lower() in ("", "none", "abstain", "pass", "skip", "discard"):
        return {"target": ""}
    return {"target": cleaned}


def _parse_candidacy_text(text: str) -> dict[str, Any]:
    return {"run": text.strip().lower() in ("yes", "run", "true", "1")}


def _parse_candidate_text(text: str) -> dict[str, Any]:
    return {"candidate": _parse_target_text(text)["target"]}


def _parse_speech_text(text: str) -> dict[str, Any]:
    return {"text": text}


TOOLS = {
    "guard_protect": ToolSchema("guard_protect", "Protect one player tonight.", [ToolParam("target")]),
    "wolf_vote": ToolSchema("wolf_vote", "Vote for tonight's attack target.", [ToolParam("target")]),
    "seer_inspect": ToolSchema("seer_inspect", "Learn whether a player is a werewolf.", [ToolParam("target")]),
    "witch_act": ToolSchema(
        "witch_act", "Use the antidote on tonight's victim, poison a player, or do nothing.",
        [ToolParam("action", description="save | poison | none"), ToolParam("target", required=False)],
    ),
    "sheriff_candidacy": ToolSchema("sheriff_candidacy", "Declare whether you run for sheriff.", [ToolParam("run")]),
    "sheriff_vote": ToolSchema("sheriff_vote", "Vote for a sheriff candidate.", [ToolParam("candidate", required=False)]),
    "day_speech": ToolSchema("day_speech", "Address the village.", [ToolParam("text")]),
    "day_vote": ToolSchema("day_vote", "Vote to banish a player, or abstain.", [ToolParam("target", required=False)]),
    "badge_pass": ToolSchema("badge_pass", "Pass the sheriff badge to a living player or discard it.", [ToolParam("target", required=False)]),
}


class WerewolfEnv(Environment):
    """Event-bus mediation of one game; decisions are requested in phase order.

    The phase machine is a program of lazy steps: "ask" steps queue decision
    requests, "do" steps apply collected decisions through the resolution
    functions above. Whenever the request queue drains, the program advances.
    """

    name = "werewolf"
    mediated = True

    def __init__(
        self,
        state: WerewolfState,
        recorder: Optional[EventRecorder] = None,
        mode: str = "full",
        pause_at_boundaries: bool = False,
    ):
        super().__init__(recorder)
        if mode not in ("full", "partial"):
            raise RuleError(f"unknown mode {mode!r}")
        self.state = state
        self.mode = mode
        self.pause_at_boundaries = pause_at_boundaries
        self.cycles_completed = 0
        self._queue: list[DecisionRequest] = []
        self._program: list[Callable[[], Optional[list[DecisionRequest]]]] = []
        self._next_installer: Optional[Callable[[], None]] = None
        self._night = NightDecisions()
        self._candidates: list[str] = []
        self._election_votes: dict[str, Optional[str]] = {}
        self._day_votes: dict[str, Optional[str]] = {}
        self._badge_choice: Optional[str] = None
        self._partial_tasks: list[DailyTask] = []
        self._partial_open = False
        self._partial_start_net = 0.0
        self._partial_result: Optional[dict[str, Any]] = None
        self._cycle_witch_save: Optional[str] = None
        self._cycle_witch_poison: Optional[str] = None
        self._cycle_wolf_banished = False
        self._started = False
        if state.phase == "ended":
            self._terminal = True
            self._started = True
        elif state.phase == "night" and mode == "partial":
            raise RuleError("partial-day mode requires a day-boundary archive")

    def _start(self) -> None:
        """Deferred kickoff so the run header can precede the first game event."""
        if self._started:
            return
        self._started = True
        if self.state.phase == "night":
            self._install_night()
        else:
            if self.mode == "partial":
                self._begin_partial()
            self._install_day()

    # -- constructors --------------------------------------------------------

    @classmethod
    def new_game(cls, roster: list[tuple[str, Role]], recorder=None, mode: str = "full", **kwargs) -> "WerewolfEnv":
        return cls(WerewolfState.new_game(roster), recorder, mode, **kwargs)

    @classmethod
    def from_archive(cls, archive: GameArchive, recorder=None, mode: str = "full", **kwargs) -> "WerewolfEnv":
        return cls(archive.load_state(), recorder, mode, **kwargs)

    # -- environment surface ---------------------------------------------

    def tools(self) -> list[ToolSchema]:
        return list(TOOLS.values())

    def pending(self) -> Optional[DecisionRequest]:
        self._start()
        return self._queue[0] if self._queue else None

    @property
    def paused(self) -> bool:
        return self._next_installer is not None

    def resume(self) -> None:
        """Continue past a phase boundary (pause_at_boundaries mode)."""
        if self._next_installer is None:
            return
        installer, self._next_installer = self._next_installer, None
        installer()

    def outcome_summary(self) -> dict[str, Any]:
        summary = {
            "winner": self.state.winner,
            "net_score": self.state.net_score(),
            "result_score": self.state.result_score(),
            "survivors": [s.agent for s in self.state.alive_seats()],
        }
        if self._partial_result is not None:
            summary["partial"] = self._partial_result
        return summary

    def partial_result(self) -> Optional[dict[str, Any]]:
        return dict(self._partial_result) if self._partial_result is not None else None

    # -- decision intake -------------------------------------------------

    def _apply(self, agent: str, name: str, arguments: dict[str, Any]) -> ActionOutcome:
        if not self._queue:
            return ActionOutcome(error="no decision pending")
        request = self._queue[0]
        if request.agent != agent:
            return ActionOutcome(error=f"waiting on {request.agent!r}, not {agent!r}")
        if request.tool.name != name:
            return ActionOutcome(error=f"forbidden in current phase: expected {request.tool.name!r}")
        outcome = self._accept(request, arguments)
        self._queue.pop(0)
        self._log_decision(request, arguments, outcome)
        if not self._queue:
            self._advance()
        return outcome

    def _log_decision(self, request: DecisionRequest, arguments: dict[str, Any], outcome: ActionOutcome) -> None:
        audience = self._decision_audience(request.tool.name, request.agent)
        payload: dict[str, Any] = {
            "tool": request.tool.name,
            "arguments": arguments,
            "cue": request.cue,
            "day": self.state.day,
        }
        if outcome.error:
            payload["error"] = outcome.error
        self.recorder.emit("decision", actor=request.agent, audience=audience, **payload)

    def _decision_audience(self, tool: str, agent: str) -> list[str]:
        if tool == "wolf_vote":
            return self.state.living_wolves()
        if tool in ("guard_protect", "seer_inspect", "witch_act"):
            return [agent]
        return self.state.everyone()

    def _accept(self, request: DecisionRequest, arguments: dict[str, Any]) -> ActionOutcome:
        tool = request.tool.name
        agent = request.agent
        try:
            if tool == "guard_protect":
                target = self._target_or_none(arguments)
                if target is not None:
                    _require_alive(self.state, target, "guard target")
                self._night.guard_target = target
                return ActionOutcome(observation=f"you protect {target or 'no one'} tonight")
            if tool == "wolf_vote":
                target = self._target_or_none(arguments)
                if target is None:
                    return ActionOutcome(observation="you cast no vote")
                _require_alive(self.state, target, "wolf target")
                self._night.wolf_votes[agent] = target
                return ActionOutcome(observation=f"you vote to attack {target}")
            if tool == "seer_inspect":
                target = self._target_or_none(arguments)
                if target is None:
                    return ActionOutcome(observation="you inspect no one")
                _require_alive(self.state, target, "seer target")
                self._night.seer_target = target
                return ActionOutcome(observation=f"you inspect {target}")
            if tool == "witch_act":
                return self._accept_witch(arguments)
            if tool == "sheriff_candidacy":
                runs = str(arguments.get("run", "")).strip().lower() in ("true", "yes", "run", "1")
                if runs:
                    self._candidates.append(agent)
                return ActionOutcome(observation="candidacy recorded")
            if tool == "sheriff_vote":
                candidate = self._target_or_none(arguments, key="candidate")
                if candidate is not None and candidate not in self._candidates:
                    return ActionOutcome(error=f"{candidate!r} is not a candidate")
                self._election_votes[agent] = candidate
                return ActionOutcome(observation="vote recorded")
            if tool == "day_speech":
                return ActionOutcome(observation="speech delivered")
            if tool == "day_vote":
                target = self._target_or_none(arguments)
                if target is not None:
                    _require_alive(self.state, target, "vote target")
                self._day_votes[agent] = target
                return ActionOutcome(observation="vote recorded")
            if tool == "badge_pass":
                target = self._target_or_none(arguments)
                if target is not None and not self.state.seat(target).alive:
                    raise RuleError(f"badge successor {target!r} is dead")
                self._badge_choice = target
                return ActionOutcome(observation="badge decision recorded")
        except RuleError as exc:
            return ActionOutcome(error=str(exc))
        return ActionOutcome(error=f"unhandled tool {tool!r}")

    def _accept_witch(self, arguments: dict[str, Any]) -> ActionOutcome:
        action = str(arguments.get("action", "none")).strip().lower()
        if action == "save":
            if not self.state.witch_antidote:
                return ActionOutcome(error="antidote already used")
            if wolf_final_target(self.state, self._night.wolf_votes) is None:
                return ActionOutcome(error="no attack to save against")
            self._night.witch_choice = WitchChoice(save=True)
            return ActionOutcome(observation="you will use the antidote")
        if action == "poison":
            if not self.state.witch_poison:
                return ActionOutcome(error="poison already used")
            target = self._target_or_none(arguments)
            if target is None:
                return ActionOutcome(error="poison requires a target")
            try:
                _require_alive(self.state, target, "poison target")
            except RuleError as exc:
                return ActionOutcome(error=str(exc))
            self._night.witch_choice = WitchChoice(poison_target=target)
            return ActionOutcome(observation=f"you will poison {target}")
        self._night.witch_choice = WitchChoice()
        return ActionOutcome(observation="you keep your potions")

    @staticmethod
    def _target_or_none(arguments: dict[str, Any], key: str = "target") -> Optional[str]:
        raw = str(arguments.get(key, "") or "").strip()
        return raw or None

    # -- phase machine -----------------------------------------------------

    def _advance(self) -> None:
        while not self._terminal and not self._queue and self._program:
            step = self._program.pop(0)
            requests = step()
            if requests:
                self._queue = requests

    def _transition(self, installer: Callable[[], None]) -> None:
        if self.pause_at_boundaries:
            self._next_installer = installer
            return
        installer()

    def _request(self, agent: str, tool_name: str, cue: str, context: str, parse=None) -> DecisionRequest:
        return DecisionRequest(
            agent=agent,
            cue=cue,
            tool=TOOLS[tool_name],
            context=context,
            parse_text=parse or _parse_target_text,
        )

    # night program

    def _install_night(self) -> None:
        self._night = NightDecisions()
        self.recorder.emit("night_start", actor="env", audience=self.state.everyone(), day=self.state.day)
        self._program = [
            self._ask_guard,
            self._ask_wolves,
            self._ask_seer,
            self._ask_witch,
            self._do_resolve_night,
        ]
        self._advance()

    def _ask_guard(self) -> Optional[list[DecisionRequest]]:
        guard = self.state.alive_with_role(Role.GUARD)
        if not guard:
            return None
        names = ", ".join(s.agent for s in self.state.alive_seats())
        return [self._request(
            guard[0].agent, "guard_protect", f"night{self.state.day}:guard",
            f"Night {self.state.day}. Living players: {names}. Choose someone to protect.",
        )]

    def _ask_wolves(self) -> Optional[list[DecisionRequest]]:
        wolves = self.state.living_wolves()
        if not wolves:
            return None
        pack = ", ".join(wolves)
        return [
            self._request(
                wolf, "wolf_vote", f"night{self.state.day}:wolf_vote",
                f"Night {self.state.day}. Your pack: {pack}. Vote for tonight's target.",
            )
            for wolf in wolves
        ]

    def _ask_seer(self) -> Optional[list[DecisionRequest]]:
        seer = self.state.alive_with_role(Role.SEER)
        if not seer:
            return None
        return [self._request(
            seer[0].agent, "seer_inspect", f"night{self.state.day}:seer",
            f"Night {self.state.day}. Choose a player to inspect.",
        )]

    def _ask_witch(self) -> Optional[list[DecisionRequest]]:
        witch = self.state.alive_with_role(Role.WITCH)
        if not witch:
            return None
        target = wolf_final_target(self.state, self._night.wolf_votes)
        self.recorder.emit(
            "witch_informed", actor="env", audience=[witch[0].agent],
            day=self.state.day, attack_target=target,
        )
        potions = [p for p, have in (("antidote", self.state.witch_antidote), ("poison", self.state.witch_poison)) if have]
        context = (
            f"Night {self.state.day}. The werewolves target {target or 'no one'} tonight. "
            f"Potions left: {', '.join(potions) or 'none'}. "
            "Reply 'save', 'poison <player>', or 'none'."
        )
        return [self._request(
            witch[0].agent, "witch_act", f"night{self.state.day}:witch", context,
            parse=_parse_witch_text,
        )]

    def _do_resolve_night(self) -> None:
        choice = self._night.witch_choice
        attack_target = wolf_final_target(self.state, self._night.wolf_votes)
        resolve_night(self.state, self._night, self.recorder)
        if choice.save and attack_target is not None:
            self._cycle_witch_save = attack_target
        if choice.poison_target is not None:
            self._cycle_witch_poison = choice.poison_target
        if self.state.phase == "ended":
            self._on_game_over()
        elif self.mode == "partial" and self._partial_open:
            self._close_partial_cycle()
        else:
            self._transition(self._install_day)

    # day program

    def _install_day(self) -> None:
        self._day_votes = {}
        self._badge_choice = None
        self.recorder.emit("day_start", actor="env", audience=self.state.everyone(), day=self.state.day)
        self._program = []
        if self.state.day == 1:
            self._candidates = []
            self._election_votes = {}
            self._program += [self._ask_candidacy, self._ask_sheriff_votes, self._do_election]
        self._program += [
            self._do_reveal,
            self._ask_badge,
            self._do_badge,
            self._ask_speeches,
            self._ask_votes,
            self._do_banishment,
            self._do_end_day,
        ]
        self._advance()

    def _ask_candidacy(self) -> list[DecisionRequest]:
        k = self.state.day
        return [
            self._request(
                seat.agent, "sheriff_candidacy", f"day{k}:candidacy",
                "Sheriff election: reply 'yes' to run, 'no' to stay out.",
                parse=_parse_candidacy_text,
            )
            for seat in self.state.alive_seats()
        ]

    def _ask_sheriff_votes(self) -> Optional[list[DecisionRequest]]:
        k = self.state.day
        self.recorder.emit(
            "candidacy_declared", actor="env", audience=self.state.everyone(),
            day=k, candidates=list(self._candidates),
        )
        if not self._candidates:
            return None
        roster = ", ".join(self._candidates)
        return [
            self._request(
                seat.agent, "sheriff_vote", f"day{k}:sheriff_vote",
                f"Candidates: {roster}. Vote for one or abstain.",
                parse=_parse_candidate_text,
            )
            for seat in self.state.alive_seats()
        ]

    def _do_election(self) -> None:
        if self._candidates:
            resolve_election(self.state, self._candidates, self._election_votes, self.recorder)
        self._candidates = []
        self._election_votes = {}

    def _do_reveal(self) -> None:
        self.recorder.emit(
            "deaths_revealed", actor="env", audience=self.state.everyone(),
            day=self.state.day, deaths=list(self.state.last_night_deaths),
        )

    def _ask_badge(self) -> Optional[list[DecisionRequest]]:
        holder = self.state.pending_badge_from
        if holder is None:
            return None
        self._badge_choice = None
        return [self._request(
            holder, "badge_pass", f"day{self.state.day}:badge",
            "You fell holding the badge. Name a living player to receive it, or discard.",
        )]

    def _do_badge(self) -> None:
        if self.state.pending_badge_from is not None:
            resolve_badge(self.state, self._badge_choice, self.recorder)
        self._badge_choice = None

    def _ask_speeches(self) -> list[DecisionRequest]:
        k = self.state.day
        return [
            self._request(
                seat.agent, "day_speech", f"day{k}:speech",
                "Address the village.",
                parse=_parse_speech_text,
            )
            for seat in self.state.alive_seats()
        ]

    def _ask_votes(self) -> list[DecisionRequest]:
        k = self.state.day
        names = ", ".join(s.agent for s in self.state.alive_seats())
        return [
            self._request(
                seat.agent, "day_vote", f"day{k}:vote",
                f"Vote to banish one of: {names}, or abstain.",
            )
            for seat in self.state.alive_seats()
        ]

    def _do_banishment(self) -> None:
        banished = resolve_banishment(self.state, self._day_votes, self.recorder)
        self._day_votes = {}
        if banished is not None and self.state.seat(banished).role is Role.WEREWOLF:
            self._cycle_wolf_banished = True
        if self.state.pending_badge_from is not None and check_win(self.state) == "ongoing":
            self._program = [self._ask_badge, self._do_badge] + self._program

    def _do_end_day(self) -> None:
        _end_day(self.state, self.recorder)
        if self.state.phase == "ended":
            self._on_game_over()
            return
        if not self._partial_open:  # a partial cycle counts once, at evaluation
            self.cycles_completed += 1
        self._transition(self._install_night)

    # partial-day bookkeeping

    def _begin_partial(self) -> None:
        self._partial_open = True
        self._partial_start_net = self.state.net_score()
        self._partial_tasks = issue_daily_tasks(self.state)
        common = [t.kind.value for t in self._partial_tasks if t.kind is not TaskKind.POISON_WEREWOLF]
        self.recorder.emit(
            "tasks_issued", actor="env", audience=self.state.living_villager_camp(),
            day=self.state.day, tasks=common, maximum=DAILY_TASK_MAX,
        )
        witch = self.state.alive_with_role(Role.WITCH)
        if any(t.kind is TaskKind.POISON_WEREWOLF for t in self._partial_tasks) and witch:
            self.recorder.emit(
                "tasks_issued", actor="env", audience=[witch[0].agent],
                day=self.state.day, tasks=[TaskKind.POISON_WEREWOLF.value], maximum=DAILY_TASK_MAX,
            )

    def _close_partial_cycle(self) -> None:
        self._partial_open = False
        self._evaluate_partial()
        self._terminal = True
        self._queue = []
        self._program = []

    def _evaluate_partial(self) -> None:
        state = self.state
        earned = 0.0
        for task in self._partial_tasks:
            if task.kind is TaskKind.PROTECT_SEER:
                task.completed = bool(state.alive_with_role(Role.SEER))
            elif task.kind is TaskKind.EXILE_WEREWOLF:
                task.completed = self._cycle_wolf_banished
            elif task.kind is TaskKind.RESCUE_VILLAGER:
                saved = self._cycle_witch_save
                if saved is not None and state.seat(saved).role in VILLAGER_CAMP:
                    task.completed = True
                    task.bonus_applied = state.seat(saved).role in KEY_ROLES
            elif task.kind is TaskKind.POISON_WEREWOLF:
                poisoned = self._cycle_witch_poison
                task.completed = poisoned is not None and state.seat(poisoned).role is Role.WEREWOLF
            if task.completed:
                earned += task.reward
                if task.bonus_applied:
                    earned += RESCUE_KEY_ROLE_BONUS
                self.recorder.emit(
                    "task_completed", actor="env", audience=state.living_villager_camp(),
                    task=task.kind.value, reward=task.reward, bonus=task.bonus_applied,
                )
        ratio = earned / DAILY_TASK_MAX
        self._partial_result = {
            "earned": earned,
            "maximum": DAILY_TASK_MAX,
            "completion_ratio": ratio,
            "net_score": state.net_score() - self._partial_start_net,
        }
        self.recorder.emit(
            "partial_result", actor="env", audience=state.everyone(), **self._partial_result,
        )
        self.cycles_completed += 1

    def _on_game_over(self) -> None:
        self._terminal = True
        self._queue = []
        self._program = []
        if self.mode == "partial" and self._partial_open:
            self._partial_open = False
            self._evaluate_partial()


def snapshot_archive(env: WerewolfEnv, seed: int = 0) -> GameArchive:
    """Archive the environment's current boundary."""
    return GameArchive(
        roster=[(s.agent, s.role.value) for s in env.state.seats],
        boundary={"phase": env.state.phase, "day": env.state.day},
        state=copy.deepcopy(env.state.to_dict()),
        events=[e.to_dict() for e in env.recorder.record.events],
        seed=seed,
    )


class ReplayBackend:
    """Answers decision cues by replaying the decision events of a record."""

    def __init__(self, events: list[dict[str, Any]]):
        self._decisions = [e for e in events if e.get("kind") == "decision"]

    def has_decisions(self) -> bool:
        return bool(self._decisions)

    def complete(self, agent, request, cue):
        from .backend import CompletionResponse, ToolCall

        if not self._decisions:
            raise RuleError(f"replay ran out of decisions at cue {cue!r}")
        event = self._decisions.pop(0)
        if event["actor"] != agent:
            raise RuleError(f"replay divergence: expected {event['actor']!r} to act, got {agent!r}")
        payload = event["payload"]
        return CompletionResponse(
            kind="tool_call",
            tool=ToolCall(payload["tool"], dict(payload["arguments"])),
        )


def replay_archive(archive: GameArchive) -> WerewolfState:
    """Re-run an archive's recorded decisions from the initial roster.

    Feeding back every recorded decision must land the fresh game exactly on
    the archived snapshot; the phase machine supplies all the rest.
    """
    recorder = EventRecorder()
    env = WerewolfEnv.new_game(archive.initial_roster(), recorder=recorder, pause_at_boundaries=True)
    backend = ReplayBackend(archive.events)
    while backend.has_decisions() and not env.terminal:
        if env.paused:
            env.resume()
            continue
        if env.pending() is None:
            raise RuleError("replay has leftover decisions but the game asks for none")
        drive_mediated(env, backend, recorder, max_decisions=1)
    return env.state


# --------------------------------------------------------------------------
# simulation drivers


def run_full_game(archive: GameArchive, policies, recorder: Optional[EventRecorder] = None,
                  max_decisions: int = 100000) -> dict[str, Any]:
    """Play a game to conclusion from an archive; policies answer every cue."""
    recorder = recorder if recorder is not None else EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="full")
    start_net = env.state.net_score()
    drive_mediated(env, policies, recorder, max_decisions=max_decisions)
    state = env.state
    return {
        "winner": state.winner,
        "net_score": state.net_score() - start_net,
        "result_score": state.result_score(),
        "record": recorder.record,
    }


def run_partial_day(archive: GameArchive, policies, recorder: Optional[EventRecorder] = None) -> dict[str, Any]:
    """Simulate exactly one day-night cycle from a day-boundary archive."""
    recorder = recorder if recorder is not None else EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="partial")
    drive_mediated(env, policies, recorder)
    result = env.partial_result() or {"completion_ratio": 0.0, "net_score": 0.0}
    result["record"] = recorder.record
    return result


def default_roster(agent_ids: list[str], rng: Optional[random.Random] = None) -> list[tuple[str, Role]]:
    """Assign the balanced default composition across nine agents."""
    if len(agent_ids) != len(DEFAULT_COMPOSITION):
        raise RuleError(f"default composition needs {len(DEFAULT_COMPOSITION)} agents, got {len(agent_ids)}")
    roles = list(DEFAULT_COMPOSITION)
    if rng is not None:
        rng.shuffle(roles)
    return list(zip(agent_ids, roles))


class RandomPolicy:
    """Seeded random but rule-respecting decisions, for audits and archives."""

    def __init__(self, state_provider, seed: int = 0):
        self._state = state_provider
        self.rng = random.Random(seed)

    def complete(self, agent, request, cue):
        from .backend import CompletionResponse

        return CompletionResponse(kind="text", text=self._decide(agent, cue))

    def _decide(self, agent: str, cue: str) -> str:
        state: WerewolfState = self._state()
        alive = [s.agent for s in state.alive_seats()]
        others = [a for a in alive if a != agent]
        stage = cue.split(":", 1)[1] if ":" in cue else cue
        if stage == "guard":
            return self.rng.choice(alive)
        if stage == "wolf_vote":
            prey = [s.agent for s in state.alive_seats() if s.role in VILLAGER_CAMP] or others
            return self.rng.choice(prey) if prey else "none"
        if stage == "seer":
            return self.rng.choice(others) if others else "none"
        if stage == "witch":
            roll = self.rng.random()
            if roll < 0.25 and state.witch_antidote:
                return "save"
            if roll < 0.5 and state.witch_poison and others:
                return f"poison {self.rng.choice(others)}"
            return "none"
        if stage == "candidacy":
            return "yes" if self.rng.random() < 0.5 else "no"
        if stage == "sheriff_vote":
            return self.rng.choice(others) if others else "none"
        if stage == "speech":
            return f"{agent} weighs the night's news."
        if stage == "vote":
            if self.rng.random() < 0.1 or not others:
                return "abstain"
            return self.rng.choice(others)
        if stage == "badge":
            return self.rng.choice(others) if others else "discard"
        return "none"


def generate_archive(seed: int, day_boundary: int = 1, agent_ids: Optional[list[str]] = None) -> GameArchive:
    """Play a seeded random game and snapshot the start of the given day."""
    rng = random.Random(seed)
    ids = agent_ids or [f"player{i}" for i in range(1, 10)]
    roster = default_roster(ids, rng)
    recorder = EventRecorder()
    env = WerewolfEnv.new_game(roster, recorder=recorder, pause_at_boundaries=True)
    policy = RandomPolicy(lambda: env.state, seed=seed + 1)
    while not env.terminal:
        if env.paused:
            if env.state.phase == "day" and env.state.day == day_boundary:
                break
            env.resume()
            continue
        if env.pending() is None:
            break
        drive_mediated(env, policy, recorder, max_decisions=1)
    if env.state.phase != "day" or env.state.day != day_boundary:
        raise RuleError(f"game ended before reaching day {day_boundary}")
    return snapshot_archive(env, seed=seed)
