"""Command-line entry points: run, replay, inspect, validate-fixture."""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import sys
from pathlib import Path

from .agents.parser import parse_question
from .agents.scripted import FixtureBundle, FixtureMiss
from .audit import AuditFailure, audit_run
from .config import Ablation, RunConfig
from .evidence import EvidenceStore
from .orchestrator import Engine, FixtureRunner, LiveRunner, RunResult, VirtualClock
from .trajectory import MalformedLog, Trajectory, load_events

log = logging.getLogger("cognigraph")


def write_artifacts(result: RunResult, out_dir: Path, config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "graph.json").write_text(json.dumps(result.graph.to_dict(), ensure_ascii=False, indent=1), encoding="utf-8")
    (out_dir / "evidence.jsonl").write_text(result.store.dump_lines(), encoding="utf-8")
    (out_dir / "config.yaml").write_text(config.dumps(), encoding="utf-8")
    if result.report is not None:
        (out_dir / "report.md").write_text(result.report.markdown, encoding="utf-8")


def replay_fixture(
    fixture: Path | str | FixtureBundle,
    config: RunConfig | None = None,
    out_dir: Path | str | None = None,
    wallclock=None,
) -> RunResult:
    """Run a fixture bundle end to end in scripted mode."""
    bundle = fixture if isinstance(fixture, FixtureBundle) else FixtureBundle(fixture)
    config = config or RunConfig()
    backend = bundle.backend()
    graph = parse_question(bundle.query.get("query", ""), backend)
    traj_path = Path(out_dir) / "trajectory.jsonl" if out_dir else None
    traj = Trajectory(traj_path, wallclock) if wallclock else Trajectory(traj_path)
    engine = Engine(
        graph,
        backend,
        FixtureRunner(bundle.observation),
        config=config,
        store=EvidenceStore(),
        trajectory=traj,
        clock=VirtualClock(),
    )
    result = engine.run()
    if out_dir:
        write_artifacts(result, Path(out_dir), config)
    return result


def run_live(query: str, config: RunConfig, out_dir: Path) -> RunResult:
    from .agents.backend import HttpChatBackend, HttpPageProvider, HttpSearchProvider

    ep = config.endpoints
    chat = HttpChatBackend(ep.chat_base_url, ep.models)
    runner = LiveRunner(chat, HttpSearchProvider(ep.search_url), HttpPageProvider(ep.page_url), config.page_limit, config.worker_cap)
    graph = parse_question(query, chat)
    engine = Engine(graph, chat, runner, config=config, trajectory=Trajectory(out_dir / "trajectory.jsonl"))
    result = engine.run()
    write_artifacts(result, out_dir, config)
    return result


# --- inspect ----------------------------------------------------------------


def summarize(events: list[dict], text_filter: str | None = None) -> list[str]:
    """One line per notable event, grouped by planner turn."""
    lines: list[str] = []
    calls = 0
    for ev in events:
        name, turn = ev["event"], ev.get("turn", 0)
        line = None
        if name == "reflect":
            line = f"turn {turn}: reflect"
        elif name == "dispatch":
            line = f"turn {turn}: add_task x{len(ev['tasks'])} {', '.join(ev['tasks'])}"
        elif name == "commit":
            calls += ev.get("search_calls", 0)
            strat = ev.get("strategy")
            extra = f" strategy={strat}" if strat else ""
            if ev.get("declared_strategy"):
                extra += f" declared={ev['declared_strategy']}"
            line = f"turn {turn}: commit {ev['task']} -> {ev['target']} edge={ev['edge_status']}{extra}"
        elif name == "add_task_rejected":
            line = f"turn {turn}: add_task rejected {ev['task']}: {ev['reason']}"
        elif name == "restructure":
            r = ev["report"]
            status = "committed" if r["committed"] else f"refused ({r['reason']})"
            line = (
                f"turn {turn}: restructure {r['op_type']} {status} "
                f"added={r['added']}, removed={r['removed']}, violations={r['violations']}"
            )
        elif name == "ablation_intercept":
            line = f"turn {turn}: intercepted {ev['op_type']} under {', '.join(ev['ablations'])}"
        elif name == "guard":
            line = f"turn {turn}: finish {'accepted' if ev['accepted'] else 'rejected'}"
            if not ev["accepted"]:
                line += " (" + ", ".join(o["node"] for o in ev["offenders"]) + ")"
        elif name == "deadline":
            line = f"turn {turn}: deadline ({ev['reason']}) removed={ev['removed']} retained={ev['retained_protected']}"
        elif name == "writing" and "Removed" in ev.get("message", ""):
            line = f"writing: [{ev['layer']}] {ev['message']} (section {ev['section']})"
        elif name == "finished":
            rep = ev.get("report") or {}
            line = f"finished: iterations={ev['iterations']} nodes={ev['nodes']} evidence={ev['evidence']} sections={rep.get('sections', 0)}"
        if line is not None and (not text_filter or text_filter.lower() in line.lower()):
            lines.append(line)
    if events and (not text_filter or "search" in text_filter.lower()):
        lines.append(f"search calls: {calls}")
    return lines


def turn_actions(events: list[dict]) -> list[str]:
    out = []
    for line in summarize(events):
        if line.startswith("turn "):
            out.append(line)
    return out


def diff_logs(a: list[dict], b: list[dict]) -> list[str]:
    return list(difflib.unified_diff(turn_actions(a), turn_actions(b), "a", "b", lineterm="", n=0))


# --- argparse ---------------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig.load()
    flags = {k: getattr(args, k, False) for k in ("a1", "a2", "a3", "a4", "full")}
    if any(flags.values()):
        merged = {k: getattr(cfg.ablation, k) or v for k, v in flags.items()}
        cfg.ablation = Ablation(**merged)
    if getattr(args, "max_turn", None):
        cfg.max_turn = args.max_turn
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--max-turn", type=int, dest="max_turn")
    for flag, text in (
        ("a1", "disable the deviation signal and router"),
        ("a2", "restrict restructuring to aug/prune"),
        ("a3", "replace interpretive update with concatenation"),
        ("a4", "flatten the graph into a dimension list"),
        ("full", "all four ablations"),
    ):
        p.add_argument(f"--{flag}", action="store_true", help=text)


def cmd_replay(args) -> int:
    cfg = _config(args)
    bundle = FixtureBundle(args.fixture)
    problems = bundle.validate()
    if problems:
        for p in problems:
            print(f"fixture: {p}", file=sys.stderr)
        return 2
    out = args.out or Path(cfg.output_dir)
    try:
        result = replay_fixture(bundle, cfg, out)
        audit = audit_run(out)
    except FixtureMiss as exc:
        print(f"fixture miss: {exc}", file=sys.stderr)
        return 2
    except AuditFailure as exc:
        print(f"audit failed [{exc.invariant}]: {exc}", file=sys.stderr)
        return 3
    summary = result.report.summary() if result.report else {}
    print(f"iterations={result.iterations} nodes={len(result.graph.nodes)} evidence={len(result.store)} sections={summary.get('sections', 0)}")
    for line in audit.lines():
        print(f"audit {line}")
    print(f"artifacts in {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.fixture:
        args.fixture = Path(args.fixture)
        return cmd_replay(args)
    if not args.query:
        print("run needs --query (real mode) or --fixture (scripted mode)", file=sys.stderr)
        return 2
    cfg.backend = "real"
    out = args.out or Path(cfg.output_dir)
    result = run_live(args.query, cfg, out)
    try:
        audit_run(out)
    except AuditFailure as exc:
        print(f"audit failed [{exc.invariant}]: {exc}", file=sys.stderr)
        return 3
    print(f"iterations={result.iterations} report={'yes' if result.report else 'no'} artifacts in {out}")
    return 0


def cmd_inspect(args) -> int:
    try:
        events = load_events(args.log)
        if args.diff:
            for line in diff_logs(events, load_events(args.diff)):
                print(line)
            return 0
    except MalformedLog as exc:
        print(f"malformed log: {exc}", file=sys.stderr)
        return 2
    for line in summarize(events, args.filter):
        print(line)
    return 0


def cmd_validate(args) -> int:
    problems = FixtureBundle(args.fixture).validate()
    for p in problems:
        print(p)
    print("fixture ok" if not problems else f"{len(problems)} problem(s)")
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cognigraph", description="Graph-driven research agent")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a query (real backends) or a fixture (scripted)")
    p.add_argument("--query")
    p.add_argument("--fixture", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="replay a scripted fixture and audit the log")
    p.add_argument("fixture", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("inspect", help="summarize a trajectory log")
    p.add_argument("log", type=Path)
    p.add_argument("--filter", default=None, help="keep lines containing this text")
    p.add_argument("--diff", type=Path, default=None, help="second log for a per-turn action diff")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("validate-fixture", help="check a fixture bundle for missing pieces")
    p.add_argument("fixture", type=Path)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
