"""Game rule tests: night/day resolution, scoring rows, tasks, archives."""

import copy
import random

import pytest

from case_study import (
    EXPECTED_BADGE_PATH,
    EXPECTED_BANISHMENTS,
    EXPECTED_RESULT_SCORE,
    EXPECTED_SURVIVORS,
    EXPECTED_VILLAGER_POINTS,
    EXPECTED_WEREWOLF_POINTS,
    EXPECTED_WINNER,
    ROSTER,
    case_study_policy,
)
from marble.backend import ScriptedBackend
from marble.errors import RuleError
from marble.records import EventRecorder
from marble.werewolf import (
    DAILY_TASK_MAX,
    GameArchive,
    NightDecisions,
    RandomPolicy,
    Role,
    ScoreRow,
    TaskKind,
    WerewolfEnv,
    WerewolfState,
    WitchChoice,
    check_win,
    default_roster,
    generate_archive,
    issue_daily_tasks,
    replay_archive,
    resolve_banishment,
    resolve_day,
    resolve_election,
    resolve_night,
    run_full_game,
    run_partial_day,
    wolf_final_target,
)

WOLVES = ["w1", "w2", "w3"]
VILLAGE = ["seer", "witch", "guard", "v1", "v2", "v3"]


def fresh_state():
    roster = [(w, Role.WEREWOLF) for w in WOLVES]
    roster += [("seer", Role.SEER), ("witch", Role.WITCH), ("guard", Role.GUARD)]
    roster += [(v, Role.VILLAGER) for v in ("v1", "v2", "v3")]
    return WerewolfState.new_game(roster)


def scores(recorder):
    return [(e.payload["row"], e.payload["points"]) for e in recorder.record.events if e.kind == "score"]


def test_scoring_table_has_twelve_distinct_rows():
    # equal (faction, points) pairs must not alias into one enum member
    members = list(ScoreRow)
    assert len(members) == 12
    assert len({m.name for m in members}) == 12
    assert ScoreRow.GUARD_PROTECTED_TARGET is not ScoreRow.WITCH_SAVED_TARGET
    assert len({m.rule for m in members}) == 12


# -- night resolution ----------------------------------------------------------


def test_guarded_target_survives_and_scores():
    state, recorder = fresh_state(), EventRecorder()
    decisions = NightDecisions(
        guard_target="v1",
        wolf_votes={w: "v1" for w in WOLVES},
    )
    resolve_night(state, decisions, recorder)
    assert state.seat("v1").alive
    rows = scores(recorder)
    assert (ScoreRow.GUARD_PROTECTED_TARGET.name, 2.0) in rows
    assert (ScoreRow.WEREWOLVES_CHOSE_TARGET.name, 1.0) in rows
    attack = [e for e in recorder.record.events if e.kind == "attack_result"]
    assert attack[0].payload["success"] is False


def test_witch_poisons_wolf():
    state, recorder = fresh_state(), EventRecorder()
    decisions = NightDecisions(witch_choice=WitchChoice(poison_target="w1"))
    resolve_night(state, decisions, recorder)
    assert not state.seat("w1").alive
    assert state.witch_poison is False
    assert (ScoreRow.WITCH_POISONED_WEREWOLF.name, 2.0) in scores(recorder)


def test_witch_poisons_villager_penalty():
    state, recorder = fresh_state(), EventRecorder()
    resolve_night(state, NightDecisions(witch_choice=WitchChoice(poison_target="v2")), recorder)
    assert (ScoreRow.WITCH_POISONED_VILLAGER.name, -2.0) in scores(recorder)
    assert state.villager_points == -2.0


def test_no_wolf_votes_no_attack_no_point():
    state, recorder = fresh_state(), EventRecorder()
    resolve_night(state, NightDecisions(), recorder)
    assert all(s.alive for s in state.seats)
    assert scores(recorder) == []
    assert state.werewolf_points == 0.0


def test_majority_with_seat_order_tiebreak():
    state = fresh_state()
    votes = {"w1": "v1", "w2": "v2", "w3": "v1"}
    assert wolf_final_target(state, votes) == "v1"
    # 1-1 tie: earliest seat in roster order wins; seer precedes v1
    tie = {"w1": "v1", "w2": "seer"}
    assert wolf_final_target(state, tie) == "seer"


def test_attack_plus_save_plus_guard_both_score():
    state, recorder = fresh_state(), EventRecorder()
    decisions = NightDecisions(
        guard_target="v1",
        wolf_votes={w: "v1" for w in WOLVES},
        witch_choice=WitchChoice(save=True),
    )
    resolve_night(state, decisions, recorder)
    assert state.seat("v1").alive
    rows = [r for r, _ in scores(recorder)]
    assert ScoreRow.GUARD_PROTECTED_TARGET.name in rows
    assert ScoreRow.WITCH_SAVED_TARGET.name in rows
    assert state.villager_points == 4.0
    assert state.witch_antidote is False


def test_poison_kills_despite_guard():
    state, recorder = fresh_state(), EventRecorder()
    decisions = NightDecisions(
        guard_target="w1",
        witch_choice=WitchChoice(poison_target="w1"),
    )
    resolve_night(state, decisions, recorder)
    assert not state.seat("w1").alive


def test_seer_learns_role_privately():
    state, recorder = fresh_state(), EventRecorder()
    resolve_night(state, NightDecisions(seer_target="w2"), recorder)
    results = [e for e in recorder.record.events if e.kind == "seer_result"]
    assert results[0].payload["result"] == "werewolf"
    assert results[0].audience == ["seer"]
    state.phase = "night"
    resolve_night(state, NightDecisions(seer_target="v1"), recorder2 := EventRecorder())
    out = [e for e in recorder2.record.events if e.kind == "seer_result"]
    assert out[0].payload["result"] == "not a werewolf"


def test_double_potion_night_rejected():
    state = fresh_state()
    with pytest.raises(RuleError, match="both potions"):
        resolve_night(state, NightDecisions(
            wolf_votes={"w1": "v1"},
            witch_choice=WitchChoice(save=True, poison_target="w1"),
        ))


def test_dead_decider_rejected_without_mutation():
    state = fresh_state()
    state.seat("guard").alive = False
    before = copy.deepcopy(state.to_dict())
    with pytest.raises(RuleError):
        resolve_night(state, NightDecisions(guard_target="v1"))
    assert state.to_dict() == before


def test_used_potion_cannot_be_reused():
    state = fresh_state()
    state.witch_antidote = False
    with pytest.raises(RuleError, match="antidote"):
        resolve_night(state, NightDecisions(
            wolf_votes={"w1": "v1"}, witch_choice=WitchChoice(save=True),
        ))


def test_wrong_phase_rejected():
    state = fresh_state()
    state.phase = "day"
    with pytest.raises(RuleError, match="phase"):
        resolve_night(state, NightDecisions())


# -- day resolution --------------------------------------------------------------


def day_state():
    state = fresh_state()
    state.phase = "day"
    return state


def test_sheriff_vote_weighs_one_and_a_half():
    state, recorder = day_state(), EventRecorder()
    state.sheriff = "v1"
    votes = {"v1": "w1", "w1": "v2", "w2": "v2", "w3": None}
    banished = resolve_banishment(state, votes, recorder)
    # v1's 1.5 < 2.0 for v2: wolves win this vote
    assert banished == "v2"
    state2, recorder2 = day_state(), EventRecorder()
    state2.sheriff = "v1"
    votes2 = {"v1": "w1", "w1": "v2"}
    assert resolve_banishment(state2, votes2, recorder2) == "w1"  # 1.5 beats 1.0


def test_tie_banishes_no_one():
    state, recorder = day_state(), EventRecorder()
    banished = resolve_banishment(state, {"v1": "w1", "w1": "v1"}, recorder)
    assert banished is None
    assert all(s.alive for s in state.seats)
    assert any(e.kind == "banish_tie" for e in recorder.record.events)


def test_vote_scoring_rows():
    state, recorder = day_state(), EventRecorder()
    # 4 villager-camp votes for a wolf, 1 for a villager => 4*0.2 - 0.1 = 0.7, +2 if banished
    votes = {"v1": "w1", "v2": "w1", "v3": "w1", "seer": "w1", "witch": "v1"}
    resolve_banishment(state, votes, recorder)
    assert state.villager_points == pytest.approx(4 * 0.2 - 0.1 + 2.0)
    rows = [r for r, _ in scores(recorder)]
    assert rows.count(ScoreRow.VOTED_FOR_WEREWOLF.name) == 4
    assert rows.count(ScoreRow.VOTED_FOR_VILLAGER.name) == 1
    assert ScoreRow.WEREWOLF_VOTED_OUT.name in rows


def test_wolf_votes_earn_no_vote_points():
    state, recorder = day_state(), EventRecorder()
    resolve_banishment(state, {"w1": "v1", "w2": "v1"}, recorder)
    rows = [r for r, _ in scores(recorder)]
    assert ScoreRow.VOTED_FOR_WEREWOLF.name not in rows
    assert ScoreRow.VOTED_FOR_VILLAGER.name not in rows
    assert ScoreRow.VILLAGER_VOTED_OUT.name in rows
    assert state.werewolf_points == 1.0


def test_dead_voter_and_dead_target_rejected():
    state = day_state()
    state.seat("v1").alive = False
    with pytest.raises(RuleError):
        resolve_banishment(state, {"v1": "w1"})
    with pytest.raises(RuleError):
        resolve_banishment(state, {"v2": "v1"})


def test_election_scores_by_camp():
    state, recorder = day_state(), EventRecorder()
    elected = resolve_election(state, ["v1", "w1"], {"v2": "v1", "v3": "v1", "w2": "w1"}, recorder)
    assert elected == "v1"
    assert state.sheriff == "v1"
    assert (ScoreRow.VILLAGER_SHERIFF_ELECTED.name, 2.0) in scores(recorder)
    state2, recorder2 = day_state(), EventRecorder()
    assert resolve_election(state2, ["w1"], {"v1": "w1"}, recorder2) == "w1"
    assert (ScoreRow.WEREWOLF_SHERIFF_ELECTED.name, 2.0) in scores(recorder2)


def test_election_tie_goes_to_earliest_declared():
    state = day_state()
    elected = resolve_election(state, ["v2", "v1"], {"w1": "v2", "w2": "v1"})
    assert elected == "v2"  # declared first


def test_badge_passes_to_living_player_before_vote():
    state, recorder = day_state(), EventRecorder()
    state.sheriff = None
    state.pending_badge_from = "v1"
    state.seat("v1").alive = False
    resolve_day(state, {}, {"v2": "w1", "v3": "w1"}, badge_choice="v2", recorder=recorder)
    badge_events = [e for e in recorder.record.events if e.kind == "badge_passed"]
    assert badge_events[0].actor == "v1" and badge_events[0].payload["to"] == "v2"
    # the banishment tally that followed already counted v2 at sheriff weight
    assert not state.seat("w1").alive


def test_badge_abstention_discards():
    state, recorder = day_state(), EventRecorder()
    state.pending_badge_from = "v1"
    state.seat("v1").alive = False
    resolve_day(state, {}, {}, badge_choice=None, recorder=recorder)
    assert state.sheriff is None
    assert any(e.kind == "badge_discarded" for e in recorder.record.events)


def test_dead_badge_successor_rejected():
    state = day_state()
    state.pending_badge_from = "v1"
    state.seat("v2").alive = False
    with pytest.raises(RuleError, match="dead"):
        resolve_day(state, {}, {}, badge_choice="v2")


def test_seer_survival_bonus_from_day_two():
    state, recorder = day_state(), EventRecorder()
    state.day = 2
    resolve_day(state, {}, {}, recorder=recorder)
    assert (ScoreRow.SEER_SURVIVED_DAY.name, 1.0) in scores(recorder)
    state1, recorder1 = day_state(), EventRecorder()
    state1.day = 1
    resolve_day(state1, {}, {}, election={"candidates": [], "votes": {}}, recorder=recorder1)
    assert (ScoreRow.SEER_SURVIVED_DAY.name, 1.0) not in scores(recorder1)


def test_speech_by_dead_seat_rejected():
    state = day_state()
    state.seat("v1").alive = False
    with pytest.raises(RuleError, match="dead"):
        resolve_day(state, {"v1": "boo"}, {})


# -- win conditions ---------------------------------------------------------------


def test_check_win_cases():
    state = fresh_state()
    assert check_win(state) == "ongoing"
    for w in WOLVES:
        state.seat(w).alive = False
    assert check_win(state) == "villagers_win"
    state2 = fresh_state()
    for v in VILLAGE:
        state2.seat(v).alive = False
    assert check_win(state2) == "werewolves_win"


def test_one_wolf_one_villager_is_ongoing():
    state = fresh_state()
    for seat in state.seats:
        seat.alive = seat.agent in ("w1", "v1")
    assert check_win(state) == "ongoing"


# -- daily tasks ------------------------------------------------------------------


def test_all_roles_alive_issues_four_tasks_max_five():
    tasks = issue_daily_tasks(fresh_state())
    assert [t.kind for t in tasks] == [
        TaskKind.PROTECT_SEER, TaskKind.EXILE_WEREWOLF,
        TaskKind.RESCUE_VILLAGER, TaskKind.POISON_WEREWOLF,
    ]
    assert DAILY_TASK_MAX == 5.0


def test_dead_seer_drops_protect_task():
    state = fresh_state()
    state.seat("seer").alive = False
    kinds = [t.kind for t in issue_daily_tasks(state)]
    assert TaskKind.PROTECT_SEER not in kinds


def test_used_potions_drop_witch_tasks():
    state = fresh_state()
    state.witch_antidote = False
    state.witch_poison = False
    kinds = [t.kind for t in issue_daily_tasks(state)]
    assert TaskKind.RESCUE_VILLAGER not in kinds
    assert TaskKind.POISON_WEREWOLF not in kinds


def test_dead_witch_drops_both_potion_tasks():
    state = fresh_state()
    state.seat("witch").alive = False
    kinds = [t.kind for t in issue_daily_tasks(state)]
    assert kinds == [TaskKind.PROTECT_SEER, TaskKind.EXILE_WEREWOLF]


# -- case-study full game ------------------------------------------------------------


def run_case_study():
    archive = GameArchive.fresh(ROSTER, seed=7)
    return run_full_game(archive, ScriptedBackend(case_study_policy()))


def test_case_study_outcome():
    result = run_case_study()
    assert result["winner"] == EXPECTED_WINNER
    assert result["result_score"] == EXPECTED_RESULT_SCORE
    record = result["record"]
    survivors = [e for e in record.events if e.kind == "game_over"]
    assert survivors[0].payload["winner"] == "villagers"


def test_case_study_badge_path():
    record = run_case_study()["record"]
    elected = [e.payload["elected"] for e in record.events if e.kind == "election"]
    passed = [e.payload["to"] for e in record.events if e.kind == "badge_passed"]
    assert elected + passed == EXPECTED_BADGE_PATH


def test_case_study_banishments_by_day():
    record = run_case_study()["record"]
    banished = {e.payload["day"]: e.payload["agent"] for e in record.events if e.kind == "banished"}
    assert banished == EXPECTED_BANISHMENTS


def test_case_study_final_vote_is_sheriff_decided():
    record = run_case_study()["record"]
    tallies = [e for e in record.events if e.kind == "vote_tally" and e.payload["day"] == 4]
    assert tallies[0].payload["totals"] == {"Deborah": 1.5, "Robert": 1.0}


def test_case_study_ledgers_match_hand_sum():
    result = run_case_study()
    record = result["record"]
    v = sum(e.payload["points"] for e in record.events if e.kind == "score" and e.payload["faction"] == "villager")
    w = sum(e.payload["points"] for e in record.events if e.kind == "score" and e.payload["faction"] == "werewolf")
    assert v == pytest.approx(EXPECTED_VILLAGER_POINTS)
    assert w == pytest.approx(EXPECTED_WEREWOLF_POINTS)
    assert result["net_score"] == pytest.approx(EXPECTED_VILLAGER_POINTS - EXPECTED_WEREWOLF_POINTS)
    survivors_event = [e for e in record.events if e.kind == "game_over"][0]
    assert survivors_event.payload["winner"] == "villagers"


def test_case_study_survivors():
    result = run_case_study()
    record = result["record"]
    # rebuild liveness from the log: banished + night deaths
    dead = {e.payload["agent"] for e in record.events if e.kind == "banished"}
    for e in record.events:
        if e.kind == "deaths_revealed":
            dead.update(e.payload["deaths"])
    alive = [name for name, _ in ROSTER if name not in dead]
    assert alive == EXPECTED_SURVIVORS


# -- ledger audit over randomized games -------------------------------------------------


def play_random_game(seed):
    rng = random.Random(seed)
    roster = default_roster([f"p{i}" for i in range(1, 10)], rng)
    recorder = EventRecorder()
    env = WerewolfEnv.new_game(roster, recorder=recorder)
    policy = RandomPolicy(lambda: env.state, seed=seed + 1)
    from marble.environment import drive_mediated

    drive_mediated(env, policy, recorder)
    return env, recorder.record


@pytest.mark.parametrize("seed", range(12))
def test_random_games_ledger_audit(seed):
    env, record = play_random_game(seed)
    v = w = 0.0
    for event in record.events:
        if event.kind == "score":
            assert event.payload["row"] in ScoreRow.__members__
            row = ScoreRow[event.payload["row"]]
            assert event.payload["points"] == row.points
            assert event.payload["faction"] == row.faction
            if row.faction == "villager":
                v += row.points
            else:
                w += row.points
    assert v == pytest.approx(env.state.villager_points)
    assert w == pytest.approx(env.state.werewolf_points)


@pytest.mark.parametrize("seed", range(12))
def test_random_games_potion_monotonicity_and_dead_silence(seed):
    env, record = play_random_game(seed)
    antidote = poison = True
    dead: set[str] = set()
    for event in record.events:
        if event.kind == "decision" and event.payload["tool"] != "badge_pass":
            # the badge pass is death processing: the dying sheriff names an heir
            assert event.actor not in dead, f"dead seat {event.actor} acted"
        if event.kind == "score" and event.payload["row"] == "WITCH_SAVED_TARGET":
            assert antidote, "antidote used twice"
            antidote = False
        if event.kind == "score" and event.payload["row"] in ("WITCH_POISONED_WEREWOLF", "WITCH_POISONED_VILLAGER"):
            assert poison, "poison used twice"
            poison = False
        if event.kind == "banished":
            dead.add(event.payload["agent"])
        if event.kind == "deaths_revealed":
            dead.update(event.payload["deaths"])
    assert env.state.witch_antidote in (antidote, False)


# -- archives -----------------------------------------------------------------------


def test_archive_round_trip_is_byte_identical():
    archive = generate_archive(seed=5, day_boundary=2)
    text = archive.to_json()
    again = GameArchive.from_json(text).to_json()
    assert again.encode() == text.encode()


def test_archive_replay_reproduces_snapshot():
    archive = generate_archive(seed=9, day_boundary=2)
    replayed = replay_archive(archive)
    assert replayed == archive.load_state()


def test_fresh_archive_replay_is_identity():
    archive = GameArchive.fresh(ROSTER, seed=1)
    assert replay_archive(archive) == archive.load_state()


def test_corrupt_archive_rejected():
    with pytest.raises(RuleError, match="archive"):
        GameArchive.from_json("{\"format\": \"something-else\"}")
    with pytest.raises(RuleError, match="corrupt"):
        GameArchive.from_json("not json at all")


# -- partial-day simulations ------------------------------------------------------------


def scripted_partial(archive, overrides):
    """Drive a partial day with a base random policy plus scripted overrides."""
    base = RandomPolicy(lambda: env.state, seed=99)
    scripted = ScriptedBackend(overrides)

    class Hybrid:
        def complete(self, agent, request, cue):
            try:
                return scripted.complete(agent, request, cue)
            except Exception:
                return base.complete(agent, request, cue)

    recorder = EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="partial")
    base = RandomPolicy(lambda: env.state, seed=99)
    from marble.environment import drive_mediated

    drive_mediated(env, Hybrid(), recorder)
    return env


def find_by_role(archive, role):
    return [a for a, r in archive.roster if r == role.value]


def test_partial_day_exile_only_scores_two_fifths():
    archive = generate_archive(seed=21, day_boundary=2)
    state = archive.load_state()
    wolves = [s.agent for s in state.alive_seats() if s.role is Role.WEREWOLF]
    target_wolf = wolves[0]
    overrides = {}
    k = state.day
    for seat in state.alive_seats():
        overrides.setdefault(seat.agent, {})[f"day{k}:vote"] = [
            target_wolf if seat.agent != target_wolf else "abstain"
        ]
        overrides[seat.agent][f"day{k}:speech"] = ["..."]
    # keep the night harmless: wolves pick no one they can kill? they must vote;
    # let the guard protect the seer and the witch hold potions
    seer = find_by_role(archive, Role.SEER)
    guard = [s.agent for s in state.alive_seats() if s.role is Role.GUARD]
    witch = [s.agent for s in state.alive_seats() if s.role is Role.WITCH]
    night = k + 1
    remaining_wolves = [w for w in wolves if w != target_wolf]
    for w in remaining_wolves:
        overrides.setdefault(w, {})[f"night{night}:wolf_vote"] = [guard[0] if guard else "none"]
    if guard:
        overrides.setdefault(guard[0], {})[f"night{night}:guard"] = [guard[0]]
    if witch:
        overrides.setdefault(witch[0], {})[f"night{night}:witch"] = ["none"]
    if seer and state.seat(seer[0]).alive:
        overrides.setdefault(seer[0], {})[f"night{night}:seer"] = [remaining_wolves[0] if remaining_wolves else "none"]

    env = scripted_partial(archive, overrides)
    result = env.partial_result()
    completed = [e for e in env.recorder.record.events if e.kind == "task_completed"]
    kinds = {e.payload["task"] for e in completed}
    if state.alive_with_role(Role.SEER) and env.state.alive_with_role(Role.SEER):
        assert result["completion_ratio"] == pytest.approx((2.0 + 1.0) / 5.0)
        assert kinds == {"exile_werewolf", "protect_seer"}
    else:
        assert result["completion_ratio"] == pytest.approx(2.0 / 5.0)
        assert kinds == {"exile_werewolf"}


def test_partial_day_nothing_achieved_when_wolves_win_votes():
    archive = generate_archive(seed=33, day_boundary=2)
    state = archive.load_state()
    villagers = [s.agent for s in state.alive_seats() if s.role in (Role.VILLAGER,)]
    if not villagers:
        pytest.skip("no plain villager alive in this archive")
    victim = villagers[0]
    overrides = {}
    k = state.day
    for seat in state.alive_seats():
        overrides.setdefault(seat.agent, {})[f"day{k}:speech"] = ["..."]
        overrides[seat.agent][f"day{k}:vote"] = [victim if seat.agent != victim else "abstain"]
    seer_alive = bool(state.alive_with_role(Role.SEER))
    env = scripted_partial(archive, overrides)
    result = env.partial_result()
    assert result is not None
    # no exile of a wolf happened; only protect_seer may have fired
    completed = {e.payload["task"] for e in env.recorder.record.events if e.kind == "task_completed"}
    assert "exile_werewolf" not in completed
    if not seer_alive:
        assert result["completion_ratio"] <= 2.0 / 5.0  # rescue at most


def test_partial_requires_day_boundary():
    archive = GameArchive.fresh(ROSTER, seed=3)
    with pytest.raises(RuleError, match="day-boundary"):
        WerewolfEnv.from_archive(archive, mode="partial")


def test_run_partial_day_returns_ratio_and_net():
    archive = generate_archive(seed=41, day_boundary=2)
    holder = {}

    class Policy:
        def __init__(self):
            self.inner = None

        def complete(self, agent, request, cue):
            return holder["policy"].complete(agent, request, cue)

    recorder = EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="partial")
    holder["policy"] = RandomPolicy(lambda: env.state, seed=1)
    from marble.environment import drive_mediated

    drive_mediated(env, Policy(), recorder)
    result = env.partial_result()
    assert result is not None
    assert 0.0 <= result["completion_ratio"] <= 1.2
    assert result["net_score"] == pytest.approx(env.state.net_score() - archive.load_state().net_score())


def test_partial_day_uncapped_ratio_with_rescue_bonus():
    # protect(1) + exile(2) + rescue of a key role (2+1 bonus) = 6 -> ratio 1.2
    state = fresh_state()
    state.phase = "day"
    state.day = 2
    archive = GameArchive(
        roster=[(s.agent, s.role.value) for s in state.seats],
        boundary={"phase": "day", "day": 2},
        state=state.to_dict(),
        events=[],
    )
    overrides = {}
    village_side = ["seer", "witch", "guard", "v1", "v2", "v3"]
    for agent in village_side + WOLVES:
        overrides[agent] = {"day2:speech": ["..."], "day2:vote": ["w1"]}
    overrides["w1"]["day2:vote"] = ["abstain"]
    # night 3: remaining wolves attack the seer; guard elsewhere; witch saves
    for wolf in ("w2", "w3"):
        overrides[wolf]["night3:wolf_vote"] = ["seer"]
    overrides["guard"]["night3:guard"] = ["witch"]
    overrides["seer"]["night3:seer"] = ["w2"]
    overrides["witch"]["night3:witch"] = ["save"]
    recorder = EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="partial")
    from marble.environment import drive_mediated

    drive_mediated(env, ScriptedBackend(overrides), recorder)
    result = env.partial_result()
    assert result["earned"] == pytest.approx(6.0)
    assert result["completion_ratio"] == pytest.approx(1.2)
    completed = {e.payload["task"]: e.payload for e in recorder.record.events if e.kind == "task_completed"}
    assert completed["rescue_villager"]["bonus"] is True
    assert set(completed) == {"protect_seer", "exile_werewolf", "rescue_villager"}


def test_tool_names_are_bit_exact():
    env = WerewolfEnv(fresh_state())
    assert [t.name for t in env.tools()] == [
        "guard_protect", "wolf_vote", "seer_inspect", "witch_act",
        "sheriff_candidacy", "sheriff_vote", "day_speech", "day_vote", "badge_pass",
    ]


def test_partial_day_nothing_earned_is_ratio_zero():
    # tie vote, harmless night: no task completes
    state = fresh_state()
    state.phase = "day"
    state.day = 2
    state.seat("seer").alive = False  # no protect task
    state.witch_antidote = False
    state.witch_poison = False  # no witch tasks
    archive = GameArchive(
        roster=[(s.agent, s.role.value) for s in state.seats],
        boundary={"phase": "day", "day": 2},
        state=state.to_dict(),
        events=[],
    )
    overrides = {}
    for seat in state.alive_seats():
        overrides[seat.agent] = {"day2:speech": ["..."], "day2:vote": ["abstain"]}
    for wolf in WOLVES:
        overrides[wolf]["night3:wolf_vote"] = ["v1"]
    overrides["guard"]["night3:guard"] = ["v1"]  # blocks the kill
    overrides["witch"]["night3:witch"] = ["none"]  # alive but out of potions
    recorder = EventRecorder()
    env = WerewolfEnv.from_archive(archive, recorder=recorder, mode="partial")
    from marble.environment import drive_mediated

    drive_mediated(env, ScriptedBackend(overrides), recorder)
    result = env.partial_result()
    assert result["earned"] == 0.0
    assert result["completion_ratio"] == 0.0
    # the net score still moves via the table rows (guard save, target chosen)
    assert result["net_score"] == pytest.approx(2.0 - 1.0)


def test_result_score_definition():
    state = fresh_state()
    for agent in ("w1", "w2", "w3"):
        state.seat(agent).alive = False
    for agent in ("v3", "guard", "witch", "seer"):
        state.seat(agent).alive = False
    assert state.result_score() == 2  # two villagers, zero wolves
    state2 = fresh_state()
    for agent in ("v1", "v2", "v3", "seer", "witch"):
        state2.seat(agent).alive = False
    state2.seat("guard").alive = True
    assert state2.result_score() == 1 - 3


def test_full_game_termination_under_random_policies():
    for seed in (100, 101, 102):
        env, record = play_random_game(seed)
        assert env.state.winner in ("villagers", "werewolves")
        assert record.events[-1].kind == "game_over"


def test_engine_iteration_cap_stops_an_ongoing_game():
    from marble.backend import CallableBackend
    from marble.config import AgentSpec, BackendSpec, ProtocolKind, RunConfig
    from marble.engine import Engine

    roster = list(ROSTER)
    config = RunConfig(
        agents=[AgentSpec(id=name) for name, _ in roster],
        relations=[],
        protocol=ProtocolKind.GRAPH,
        scenario={"kind": "werewolf", "mode": "full"},
        max_iterations=2,
        seed=1,
        backend=BackendSpec(),
    )
    recorder = EventRecorder()
    env = WerewolfEnv.new_game(roster, recorder=recorder)
    policy = RandomPolicy(lambda: env.state, seed=4)
    # peaceful wolves and abstaining voters: the game can never end
    def respond(agent, request, cue):
        stage = cue.split(":", 1)[1]
        if stage in ("wolf_vote", "vote", "sheriff_vote", "candidacy"):
            return "none" if stage != "candidacy" else "no"
        return policy.complete(agent, request, cue)

    record = Engine(config, env, CallableBackend(respond), recorder=recorder).run()
    markers = [e.payload["iteration"] for e in record.events if e.kind == "iteration_start"]
    assert markers == [1, 2]
    assert env.state.winner is None
    run_end = [e for e in record.events if e.kind == "run_end"][0]
    assert run_end.payload["terminal"] is False
