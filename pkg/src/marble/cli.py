"""Operator entry point: run scenarios, replay logs, compute metrics, print stats.

Exit codes: 0 success, 1 validation error (bad config/arguments), 2 runtime
error (backend failures, replay divergence, corrupt files).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path
from typing import Optional

from . import bargaining, evaluator, werewolf
from .backend import ScriptedBackend, build_backend
from .config import ProtocolKind, RunConfig, load_config_file
from .engine import Engine
from .environment import ScratchpadEnv
from .errors import ConfigError, MarbleError
from .records import EventRecorder, RunRecord

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def build_environment(config: RunConfig, recorder: EventRecorder):
    kind = config.scenario_kind
    if kind == "notepad":
        return ScratchpadEnv(task=str(config.scenario.get("task", "")), recorder=recorder)
    if kind == "bargaining":
        return bargaining.BargainingEnv.from_config(config, recorder=recorder)
    if kind == "werewolf":
        return _build_werewolf(config, recorder)
    raise ConfigError(f"unknown scenario kind {kind!r}")


def _build_werewolf(config: RunConfig, recorder: EventRecorder):
    if config.protocol is not ProtocolKind.GRAPH:
        raise ConfigError("the werewolf scenario runs under the graph protocol")
    mode = str(config.scenario.get("mode", "full"))
    archive_path = config.scenario.get("archive")
    if archive_path:
        archive = werewolf.GameArchive.from_json(Path(archive_path).read_text(encoding="utf-8"))
        return werewolf.WerewolfEnv.from_archive(archive, recorder=recorder, mode=mode)
    explicit = [(a.id, a.extras.get("seat_role")) for a in config.agents if a.extras.get("seat_role")]
    if explicit and len(explicit) == len(config.agents):
        roster = [(agent, werewolf.Role(role)) for agent, role in explicit]
    else:
        roster = werewolf.default_roster(config.agent_ids(), random.Random(config.seed))
    return werewolf.WerewolfEnv.new_game(roster, recorder=recorder, mode=mode)


def _judge_backend(args, config_snapshot: Optional[dict] = None):
    if getattr(args, "judge", "scripted") == "remote":
        from .backend import RemoteBackend

        return RemoteBackend(model=getattr(args, "judge_model", "") or "gpt-4o")
    policy_path = getattr(args, "judge_policy", None)
    if policy_path:
        import yaml

        policy = yaml.safe_load(Path(policy_path).read_text(encoding="utf-8")) or {}
        return ScriptedBackend(policy)
    if config_snapshot:
        policy = config_snapshot.get("backend", {}).get("policy", {})
        if evaluator.JUDGE_AGENT in policy:
            return ScriptedBackend(policy)
    return evaluator.FixedScoreJudge()


def cmd_run(args) -> int:
    config = load_config_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    recorder = EventRecorder()
    env = build_environment(config, recorder)
    backend = build_backend(config.backend)
    engine = Engine(config, env, backend, recorder=recorder)
    record = engine.run()
    out_dir = Path(args.out) if args.out else Path("runs") / record.run_id
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "events.jsonl"
    log_path.write_text(record.serialize(), encoding="utf-8")
    judge_backend = _judge_backend(args, record.config_snapshot)
    detect = any(
        cue.startswith("milestone:")
        for cue in config.backend.policy.get(evaluator.JUDGE_AGENT, {})
    ) or args.judge == "remote"
    report = evaluator.evaluate_record(
        record, judge_backend,
        detect_milestones=detect,
        total_milestones=_milestone_total(record.config_snapshot),
    )
    report_path = out_dir / "metrics.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"run {record.run_id}: {len(record.events)} events -> {log_path}")
    print(f"metrics -> {report_path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    original = RunRecord.deserialize(text)
    snapshot = original.config_snapshot
    if snapshot is None:
        print("log carries no config snapshot; cannot replay", file=sys.stderr)
        return EXIT_VALIDATION
    config = RunConfig.from_dict(snapshot)
    recorder = EventRecorder()
    env = build_environment(config, recorder)
    backend = build_backend(config.backend)
    record = Engine(config, env, backend, recorder=recorder).run()
    for index, event in enumerate(original.events):
        if index >= len(record.events) or record.events[index] != event:
            print(f"replay diverged at seq {event.seq}", file=sys.stderr)
            return EXIT_RUNTIME
    if len(record.events) != len(original.events):
        print(f"replay produced {len(record.events)} events, log has {len(original.events)}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"replay ok: {len(record.events)} events match")
    return EXIT_OK


def cmd_eval(args) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    record = RunRecord.deserialize(text)
    judge_backend = _judge_backend(args, record.config_snapshot)
    detect = False
    if record.config_snapshot:
        policy = record.config_snapshot.get("backend", {}).get("policy", {})
        detect = any(cue.startswith("milestone:") for cue in policy.get(evaluator.JUDGE_AGENT, {}))
    if getattr(args, "judge_policy", None):
        detect = True
    report = evaluator.evaluate_record(
        record, judge_backend,
        detect_milestones=detect,
        total_milestones=_milestone_total(record.config_snapshot),
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _milestone_total(snapshot) -> Optional[int]:
    """Predefined milestone plans fix M; otherwise the evaluator falls back
    to the iteration cap."""
    if not snapshot:
        return None
    scenario = snapshot.get("scenario", {})
    entries = scenario.get("milestones") if isinstance(scenario, dict) else None
    if not entries:
        return None
    return len(evaluator.MilestonePlan(entries))


def cmd_stats(args) -> int:
    human = json.loads(Path(args.human).read_text(encoding="utf-8"))
    machine = json.loads(Path(args.machine).read_text(encoding="utf-8"))
    result = evaluator.correlations(human, machine)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marble", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--judge", choices=["scripted", "remote"], default="scripted")
    p_run.add_argument("--judge-policy", dest="judge_policy", default=None)
    p_run.set_defaults(fn=cmd_run)

    p_replay = sub.add_parser("replay", help="re-execute a log and verify it matches")
    p_replay.add_argument("--log", required=True)
    p_replay.set_defaults(fn=cmd_replay)

    p_eval = sub.add_parser("eval", help="recompute metrics for a log")
    p_eval.add_argument("--log", required=True)
    p_eval.add_argument("--judge", choices=["scripted", "remote"], default="scripted")
    p_eval.add_argument("--judge-policy", dest="judge_policy", default=None)
    p_eval.set_defaults(fn=cmd_eval)

    p_stats = sub.add_parser("stats", help="correlation statistics between two rating files")
    p_stats.add_argument("--human", required=True)
    p_stats.add_argument("--machine", required=True)
    p_stats.set_defaults(fn=cmd_stats)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MarbleError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
