"""Offline audit of a trajectory log against the engine's invariants."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CognigraphError
from .graph import CognitiveState, citation_markers
from .trajectory import load_events

CHECKS = ("I1", "I2", "state", "exclusivity", "budget", "guard", "reachability", "citations")

_KIND = {
    "dispatch": "add_task",
    "commit": "add_task",
    "add_task_rejected": "add_task",
    "restructure": "propose_restructure",
    "ablation_intercept": "propose_restructure",
    "guard": "finish",
    "reflect": "reflect",
}


class AuditFailure(CognigraphError):
    def __init__(self, invariant: str, seq: int | None, detail: str):
        self.invariant = invariant
        self.seq = seq
        super().__init__(f"{invariant} violated at event {seq}: {detail}")


@dataclass
class AuditReport:
    events: int = 0
    digests: int = 0
    checks: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CHECKS})

    def lines(self) -> list[str]:
        return [f"{name}: ok ({n} checks)" for name, n in self.checks.items()]


def _expected_state(node: dict) -> str:
    if node["start"]:
        return CognitiveState.START.value
    if not node["has_findings"]:
        return CognitiveState.UNKNOWN.value
    return (CognitiveState.PARTIAL if node["core_pending"] else CognitiveState.KNOWN).value


def _reachable(digest: dict) -> set[str]:
    nodes = digest["nodes"]
    out: dict[str, list[str]] = {n: [] for n in nodes}
    for s, t in digest["edges"].values():
        out.setdefault(s, []).append(t)
    roots = [n for n, d in nodes.items() if d["start"]]
    seen = set(roots)
    q = deque(roots)
    while q:
        for t in out.get(q.popleft(), []):
            if t not in seen:
                seen.add(t)
                q.append(t)
    return seen


def _exempt_items(event: dict) -> dict[str, set[str]]:
    """Item hashes a committed restructure was allowed to retract, per node."""
    from .orchestrator import _h  # same hashing as the digests

    out: dict[str, set[str]] = {}
    for e in event.get("edits", []):
        if e.get("op") == "modify_node" and e.get("remove_items"):
            out.setdefault(e["id"], set()).update(_h(i) for i in e["remove_items"])
    return out


def audit_events(events: list[dict], max_turn: int | None = None, report: AuditReport | None = None) -> AuditReport:
    rep = report or AuditReport()
    rep.events = len(events)
    prev: dict | None = None
    protected_seen: set[str] = set()
    kinds_by_turn: dict[int, set[str]] = {}
    deadline_seq: int | None = None
    for ev in events:
        seq = ev.get("seq")
        name = ev["event"]
        if name == "parse" and max_turn is None:
            max_turn = ev.get("max_turn")
        kind = _KIND.get(name)
        if kind is not None:
            kinds = kinds_by_turn.setdefault(ev.get("turn", 0), set())
            kinds.add(kind)
            rep.checks["exclusivity"] += 1
            if len(kinds) > 1:
                raise AuditFailure("exclusivity", seq, f"turn {ev.get('turn')} mixes {sorted(kinds)}")
        if name == "deadline":
            deadline_seq = seq
        if name == "dispatch" and deadline_seq is not None:
            raise AuditFailure("budget", seq, "search dispatched after the soft deadline")
        if max_turn is not None and ev.get("turn", 0) > 3 * max_turn + 1:
            raise AuditFailure("budget", seq, f"turn {ev['turn']} beyond the hard ceiling {3 * max_turn}")
        rep.checks["budget"] += 1

        if name == "guard" and ev.get("accepted"):
            rep.checks["guard"] += 1
            unknown = [n for n, d in (prev or {"nodes": {}})["nodes"].items() if d["state"] == "unknown"]
            if unknown:
                raise AuditFailure("guard", seq, f"finish accepted with unknown nodes {unknown}")

        digest = ev.get("digest")
        if digest is None:
            continue
        rep.digests += 1
        nodes = digest["nodes"]
        for nid, d in nodes.items():
            rep.checks["state"] += 1
            if d["state"] != _expected_state(d):
                raise AuditFailure("state", seq, f"{nid} is {d['state']}, expected {_expected_state(d)}")
        protected = set(digest["protected"])
        rep.checks["I2"] += 1
        if not protected_seen <= protected or not protected <= set(nodes):
            missing = sorted((protected_seen - protected) | (protected - set(nodes)))
            raise AuditFailure("I2", seq, f"protected nodes missing: {missing}")
        protected_seen |= protected
        rep.checks["reachability"] += 1
        unreachable = set(nodes) - _reachable(digest)
        if unreachable:
            raise AuditFailure("reachability", seq, f"unreachable nodes {sorted(unreachable)}")
        if prev is not None:
            exempt = _exempt_items(ev) if name == "restructure" else {}
            for nid, old in prev["nodes"].items():
                if not old["pairs"]:
                    continue
                rep.checks["I1"] += 1
                new = nodes.get(nid)
                if new is None:
                    raise AuditFailure("I1", seq, f"node {nid} with findings disappeared")
                skip = exempt.get(nid, set())
                want = {p for p in old["pairs"] if p.split("/", 1)[0] not in skip}
                lost = want - set(new["pairs"])
                if lost:
                    raise AuditFailure("I1", seq, f"{len(lost)} finding(s) of {nid} lost or altered")
        prev = digest
    return rep


def audit_citations(report_md: str, evidence_ids: set[int], rep: AuditReport | None = None) -> AuditReport:
    rep = rep or AuditReport()
    for m in citation_markers(report_md):
        rep.checks["citations"] += 1
        if m not in evidence_ids:
            raise AuditFailure("citations", None, f"marker [[{m}]] has no evidence record")
    return rep


def audit_run(run_dir: Path | str) -> AuditReport:
    """Audit a run directory: trajectory.jsonl plus report.md / evidence.jsonl when present."""
    run_dir = Path(run_dir)
    rep = audit_events(load_events(run_dir / "trajectory.jsonl"))
    report = run_dir / "report.md"
    evidence = run_dir / "evidence.jsonl"
    if report.exists():
        ids = set()
        if evidence.exists():
            ids = {json.loads(line)["m"] for line in evidence.read_text(encoding="utf-8").splitlines() if line.strip()}
        audit_citations(report.read_text(encoding="utf-8"), ids, rep)
    return rep
