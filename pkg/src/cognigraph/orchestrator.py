"""Run loop: planner turns, parallel search dispatch, serialized commits and termination."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .actions import (
    ActionParseError,
    AddTask,
    ExclusivityError,
    Finish,
    PlannerTurn,
    ProposeRestructure,
    SearchTask,
    parse_planner_output,
)
from .agents.backend import BackendFailure, ChatBackend, Role, SchemaError
from .agents.prompts import render
from .assimilation import CrossRouter, Judger, KeyJudger, Observation, assimilate, bind_evidence, concat_assimilate
from .config import EngineWiring, RunConfig, apply_ablation
from .deviation import DeviationSignal, quality_gap, select_strategy
from .errors import CognigraphError
from .evidence import EvidenceStore
from .graph import (
    CognitiveGraph,
    CognitiveState,
    EdgeStatus,
    IllegalTransition,
    SearchHistoryEntry,
    compile_planner_view,
    edge_transition,
    recompute_hops,
    strip_markers,
)
from .restructuring import (
    NeedsRollback,
    PatternMismatch,
    RestructureReport,
    edit_from_dict,
    edit_to_dict,
    nearest_ancestor_policy,
    repair_orphans,
    restructure,
)
from .trajectory import Trajectory
from .writing import (
    InsufficientEvidence,
    NoWritableContent,
    Report,
    Transcript,
    assemble_report,
    availability_index,
    bind_insights,
    bound_quotes,
    finalize_prose,
    plan_outline,
    previous_tail,
    section_findings,
)

log = logging.getLogger(__name__)

DEADLINE_MESSAGE = "soft deadline reached: call finish() to write the report"


class DeadlineSearchRejected(CognigraphError):
    def __init__(self):
        super().__init__(DEADLINE_MESSAGE)


class HardCeilingReached(CognigraphError):
    pass


# --- budget and time --------------------------------------------------------


class Clock(Protocol):
    def now(self) -> float: ...


class SystemClock:
    def now(self) -> float:
        return time.monotonic()


class VirtualClock:
    def __init__(self, start: float = 0.0):
        self.t = start

    def now(self) -> float:
        return self.t

    def advance(self, seconds: float) -> None:
        self.t += seconds


@dataclass
class RunBudget:
    soft_deadline_s: float = 70 * 60
    max_turn: int = 20

    @property
    def hard_ceiling(self) -> int:
        return 3 * self.max_turn

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunBudget":
        return cls(cfg.soft_deadline_minutes * 60, cfg.max_turn)


# --- termination ------------------------------------------------------------


@dataclass
class GuardVerdict:
    accepted: bool
    offenders: list[dict] = field(default_factory=list)

    def message(self) -> str:
        if self.accepted:
            return "finish accepted"
        parts = [
            f"{o['node']} ({o['name']}) is still unknown; incoming edges: {', '.join(o['incoming']) or 'none'}"
            for o in self.offenders
        ]
        return "finish rejected: " + "; ".join(parts)


def guard_finish(graph: CognitiveGraph) -> GuardVerdict:
    offenders = [
        {"node": nid, "name": n.name, "incoming": [e.id for e in graph.incoming(nid)]}
        for nid, n in graph.nodes.items()
        if n.cognitive_state is CognitiveState.UNKNOWN
    ]
    return GuardVerdict(not offenders, offenders)


def enforce_soft_deadline(graph: CognitiveGraph) -> tuple[CognitiveGraph, list[str], list[str]]:
    """Remove every Unknown node; protected Unknown nodes stay and are reported.

    Returns (graph, removed ids, retained protected ids). Children cut off by a
    removal are reattached to their nearest surviving ancestor.
    """
    reference = graph.copy()
    removed, retained = [], []
    for nid in list(graph.nodes):
        node = graph.nodes[nid]
        if node.cognitive_state is not CognitiveState.UNKNOWN:
            continue
        if nid in graph.user_protected:
            retained.append(nid)
            continue
        graph.remove_node(nid)
        removed.append(nid)
    if removed:
        try:
            repair_orphans(graph, nearest_ancestor_policy(reference))
        except NeedsRollback:  # pragma: no cover - roots always survive
            log.error("orphans remain after deadline cleanup")
        recompute_hops(graph)
    return graph, removed, retained


# --- roles the engine drives ------------------------------------------------


class SearchRunner(Protocol):
    def run(self, task: SearchTask, local_context: str) -> Observation: ...


class FixtureRunner:
    """Returns the recorded observation for each task id."""

    def __init__(self, lookup: Callable[[str], dict], on_run: Callable[[SearchTask], None] | None = None):
        self.lookup = lookup
        self.on_run = on_run

    def run(self, task: SearchTask, local_context: str) -> Observation:
        if self.on_run:
            self.on_run(task)
        return Observation.from_dict(self.lookup(task.task_id))


class LiveRunner:
    def __init__(self, chat: ChatBackend, search, pages, page_limit: int | None = None, workers: int = 4):
        self.chat, self.search, self.pages = chat, search, pages
        self.page_limit, self.workers = page_limit, workers

    def run(self, task: SearchTask, local_context: str) -> Observation:
        from .agents.searcher import execute_search_task

        return execute_search_task(
            task, self.chat, self.search, self.pages,
            local_context=local_context, page_limit=self.page_limit, max_workers=self.workers,
        )


@dataclass
class StepOutcome:
    kind: str
    structural_change: bool = False
    content_change: bool = False
    finished: bool = False
    messages: list[str] = field(default_factory=list)


def _h(obj) -> str:
    return hashlib.sha1(json.dumps(obj, ensure_ascii=False).encode()).hexdigest()[:12]


def graph_digest(graph: CognitiveGraph) -> dict:
    """Compact per-commit state used by the offline audit.

    Finding pairs are hashed; item-level pairs carry the hash of their item so
    that a documented item removal can be told apart from lost findings.
    """
    nodes = {}
    for nid, n in graph.nodes.items():
        pairs = sorted(f"{_h(p[1]) if p[0] == 'item' else '-'}/{_h(p)}" for p in n.finding_pairs())
        nodes[nid] = {
            "state": n.cognitive_state.value,
            "start": n.is_start,
            "core_pending": len(n.core_pending),
            "has_findings": n.has_findings,
            "pairs": pairs,
            "refs": sorted(n.cited_refs),
        }
    return {
        "nodes": nodes,
        "edges": {eid: [e.source, e.target] for eid, e in sorted(graph.edges.items())},
        "protected": sorted(graph.user_protected),
    }


def local_context(graph: CognitiveGraph, task: SearchTask, include_upstream: bool = True) -> str:
    """Target node plus its direct upstream neighbours; never the whole graph."""

    def summary(nid: str) -> str:
        n = graph.nodes[nid]
        lines = [f"{n.name} [{n.cognitive_state.value}]"]
        for item, attrs in n.item_findings.items():
            lines += [f"  {item} / {k}: {strip_markers(v)}" for k, v in attrs.items()]
        for k, v in n.cross_item_findings.items():
            val = " > ".join(v) if isinstance(v, list) else v
            lines.append(f"  {k}: {strip_markers(val)}")
        return "\n".join(lines)

    parts = [f"Target: {summary(task.target_node_id)}"]
    if include_upstream:
        for up in graph.upstream(task.target_node_id):
            if not up.is_start:
                parts.append(f"Upstream: {summary(up.id)}")
    return "\n".join(parts)


# --- engine -----------------------------------------------------------------


@dataclass
class RunResult:
    graph: CognitiveGraph
    store: EvidenceStore
    trajectory: Trajectory
    report: Report | None
    transcript: Transcript
    iterations: int
    search_calls: int


class Engine:
    def __init__(
        self,
        graph: CognitiveGraph,
        chat: ChatBackend,
        runner: SearchRunner,
        *,
        config: RunConfig | None = None,
        store: EvidenceStore | None = None,
        trajectory: Trajectory | None = None,
        clock: Clock | None = None,
        judger: Judger | None = None,
        wiring: EngineWiring | None = None,
        evidence_check=None,
    ):
        self.config = config or RunConfig()
        self.graph = graph
        self.chat = chat
        self.runner = runner
        self.store = store or EvidenceStore()
        self.trajectory = trajectory or Trajectory()
        self.clock = clock or SystemClock()
        self.judger = judger or KeyJudger()
        self.wiring = wiring or apply_ablation(self.config)
        self.evidence_check = evidence_check
        self.budget = RunBudget.from_config(self.config)
        self.started = self.clock.now()
        self.iterations = 0
        self.search_calls = 0
        self.deadline_hit = False
        self.feedback: list[str] = []
        self.region_history: dict[str, list[str]] = {}
        self.transcript = Transcript()
        self.ablation_hits = 0

    # -- planner context --

    def deadline_due(self) -> bool:
        return (self.clock.now() - self.started) >= self.budget.soft_deadline_s or self.iterations >= self.budget.max_turn

    def strategy_rows(self) -> list[str]:
        rows = []
        th = self.config.thresholds
        for nid, n in self.graph.nodes.items():
            if n.is_start or not n.quality_profile.page_window:
                continue
            d = DeviationSignal.from_profile(n.quality_profile)
            s = select_strategy(d, th.tau_h, th.psi)
            gap = " quality-gap" if quality_gap(d, th.tau_l) else ""
            rows.append(
                f"  {nid}: ({d.mean_cr:.1f}, {d.mean_aap:.1f}, {int(d.phi)}, {d.psi.value}) -> {s.value}{gap}"
            )
        return rows

    def planner_prompt(self) -> str:
        view = compile_planner_view(self.graph, flat=not self.wiring.show_edges)
        table = ""
        if self.wiring.strategy_table:
            table = render("strategy_table", rows="\n".join(self.strategy_rows()) or "  (no searched nodes yet)")
        else:
            self.ablation_hits += 1
        ops = sorted(o.value for o in self.wiring.allowed_ops) if self.wiring.allowed_ops is not None else [
            "conc", "aug", "pivot", "prune", "correct"
        ]
        elapsed = (self.clock.now() - self.started) / 60
        budget = f"iteration {self.iterations} of {self.budget.max_turn}; {elapsed:.1f} of {self.budget.soft_deadline_s / 60:.0f} minutes used"
        fb = self.feedback[:]
        if self.deadline_hit:
            fb.insert(0, DEADLINE_MESSAGE)
        feedback = ("Feedback:\n" + "\n".join(f"- {f}" for f in fb) + "\n") if fb else ""
        return render(
            "planner",
            query=self.graph.query,
            graph_view=view,
            strategy_table=table,
            allowed_ops=", ".join(ops),
            budget=budget,
            feedback=feedback,
            unit_label=self.wiring.unit_label,
        )

    def next_turn(self) -> PlannerTurn:
        prompt = self.planner_prompt()
        self.feedback = []
        last: Exception | None = None
        for _ in range(self.config.schema_retries + 1):
            try:
                payload = self.chat.complete(Role.PLANNER, prompt, schema="planner_turn", key=str(self.iterations))
                return parse_planner_output(payload)
            except (ActionParseError, ExclusivityError, SchemaError, ValueError) as exc:
                last = exc
                log.warning("planner output rejected: %s", exc)
        self.trajectory.emit("planner_invalid", error=str(last))
        self.feedback.append(f"previous reply was invalid: {last}")
        return PlannerTurn([], "invalid planner output")

    # -- steps --

    def step(self, turn: PlannerTurn) -> StepOutcome:
        if self.iterations > self.budget.hard_ceiling:
            raise HardCeilingReached(f"{self.iterations} iterations")
        kind = turn.kind
        if kind == "reflect":
            self.trajectory.emit("reflect", action="reflect", note=turn.note[:500], structural=False, content=False)
            return StepOutcome("reflect")
        if kind == "add_task":
            return self._search_step([a.task for a in turn.actions if isinstance(a, AddTask)])
        if kind == "propose_restructure":
            action = turn.actions[0]
            assert isinstance(action, ProposeRestructure)
            return self._restructure_step(action)
        assert isinstance(turn.actions[0], Finish)
        verdict = guard_finish(self.graph)
        self.trajectory.emit(
            "guard", action="finish", accepted=verdict.accepted, offenders=verdict.offenders,
            structural=False, content=False,
        )
        if not verdict.accepted:
            self.feedback.append(verdict.message())
        return StepOutcome("finish", finished=verdict.accepted, messages=[verdict.message()])

    def _reject_task(self, task: SearchTask, reason: str) -> None:
        self.trajectory.emit("add_task_rejected", action="add_task", task=task.task_id, edge=task.edge_id, reason=reason)
        self.feedback.append(f"{task.task_id}: {reason}")

    def _search_step(self, tasks: list[SearchTask]) -> StepOutcome:
        out = StepOutcome("add_task")
        if self.deadline_hit:
            for t in tasks:
                self._reject_task(t, str(DeadlineSearchRejected()))
            out.messages.append(DEADLINE_MESSAGE)
            return out
        accepted: list[SearchTask] = []
        for t in tasks:
            edge = self.graph.edges.get(t.edge_id)
            if edge is None:
                self._reject_task(t, f"unknown edge {t.edge_id}")
                continue
            if t.target_node_id and t.target_node_id != edge.target:
                self._reject_task(t, f"edge {edge.id} targets {edge.target}, not {t.target_node_id}")
                continue
            t.target_node_id = edge.target
            if self.graph.nodes[edge.target].is_start:
                self._reject_task(t, "start nodes never receive search tasks")
                continue
            try:
                edge_transition(edge, "dispatched")
            except IllegalTransition as exc:
                self._reject_task(t, str(exc))
                continue
            # the task's criteria become the edge's current criteria
            if t.core_criteria:
                edge.core_criteria = list(t.core_criteria)
            if t.supplementary_criteria or t.core_criteria:
                edge.supplementary_criteria = list(t.supplementary_criteria)
            accepted.append(t)
        if not accepted:
            return out
        self.trajectory.emit(
            "dispatch", action="add_task", tasks=[t.task_id for t in accepted],
            edges=[t.edge_id for t in accepted], structural=False, content=False,
        )
        for task, obs in self.dispatch_parallel(accepted):
            self.commit(task, obs)
            out.content_change = True
        return out

    def dispatch_parallel(self, tasks: list[SearchTask]) -> list[tuple[SearchTask, Observation]]:
        """Run searchers concurrently; results come back in commit order."""
        contexts = {t.task_id: local_context(self.graph, t, self.wiring.upstream_context) for t in tasks}
        if not self.wiring.upstream_context:
            self.ablation_hits += 1

        def work(t: SearchTask) -> Observation:
            try:
                return self.runner.run(t, contexts[t.task_id])
            except (BackendFailure, SchemaError, OSError) as exc:
                return Observation(t.task_id, t.target_node_id, t.edge_id, search_experience=[f"search task failed: {exc}"])

        results: list[tuple[SearchTask, Observation]] = []
        with ThreadPoolExecutor(max_workers=max(1, self.config.worker_cap)) as pool:
            futures = {pool.submit(work, t): t for t in tasks}
            if self.config.commit_order == "completion":
                for fut in as_completed(futures):
                    results.append((futures[fut], fut.result()))
            else:
                for fut, t in futures.items():
                    results.append((t, fut.result()))
        return results

    def commit(self, task: SearchTask, obs: Observation) -> None:
        obs = bind_evidence(obs, self.store)
        self.search_calls += obs.search_calls
        if self.wiring.interpretive_update:
            _, update = assimilate(
                self.graph, obs, judger=self.judger, router=CrossRouter(self.config.cross_route_cap, self.judger)
            )
        else:
            self.ablation_hits += 1
            _, update = concat_assimilate(self.graph, obs)
        edge = self.graph.edges[obs.edge_id]
        target = self.graph.nodes[obs.target_node]
        edge.search_history.append(
            SearchHistoryEntry("; ".join(obs.queries) or task.task_id, strip_markers(obs.synthesis)[:300])
        )
        edge_transition(edge, "task_closed", target.cognitive_state)
        event = {
            "action": "commit",
            "task": task.task_id,
            "edge": edge.id,
            "target": target.id,
            "edge_status": edge.status.value,
            "attempts": edge.attempt_count,
            "update": update.summary(),
            "evidence": sorted({f.evidence_id for f in obs.findings if f.evidence_id is not None}),
            "search_calls": obs.search_calls,
            "declared_strategy": task.strategy,
            "structural": False,
            "content": True,
            "digest": graph_digest(self.graph),
        }
        if self.wiring.use_router:
            th = self.config.thresholds
            delta = DeviationSignal.from_profile(target.quality_profile)
            strategy = select_strategy(delta, th.tau_h, th.psi)
            self.region_history.setdefault(edge.id, []).append(strategy.value)
            event.update(delta=delta.to_dict(), strategy=strategy.value, quality_gap=quality_gap(delta, th.tau_l))
        else:
            self.ablation_hits += 1
        self.trajectory.emit("commit", **event)

    def _restructure_step(self, action: ProposeRestructure) -> StepOutcome:
        out = StepOutcome("propose_restructure")
        intent = action.intent
        if intent is None:
            report = RestructureReport(op_type=action.raw_op or "?", reason="pattern_mismatch",
                                       detail=f"{action.raw_op!r} is not a restructuring operator")
            self._emit_restructure(None, report, [])
            return out
        if self.wiring.allowed_ops is not None and intent.op_type not in self.wiring.allowed_ops:
            self.ablation_hits += 1
            self.trajectory.emit("ablation_intercept", op_type=intent.op_type.value, ablations=list(self.wiring.ablations))
            _, report = restructure(intent, [], self.graph, allowed_ops=self.wiring.allowed_ops)
            self._emit_restructure(intent, report, [])
            return out
        key = action.realization_key or f"turn-{self.iterations}"
        try:
            edits = self.realize(intent, key)
        except PatternMismatch as exc:
            report = RestructureReport(op_type=intent.op_type.value, reason="pattern_mismatch", detail=str(exc))
            self._emit_restructure(intent, report, [])
            return out
        except _ManagerRefusal as exc:
            report = RestructureReport(op_type=intent.op_type.value, reason="manager_refused", detail=str(exc))
            self._emit_restructure(intent, report, [])
            return out
        new_graph, report = restructure(
            intent, edits, self.graph, allowed_ops=self.wiring.allowed_ops, evidence_check=self.evidence_check
        )
        self.graph = new_graph
        out.structural_change = report.committed
        self._emit_restructure(intent, report, edits)
        return out

    def realize(self, intent, key: str):
        prompt = render(
            "graph_manager",
            intent=json.dumps(intent.to_dict(), ensure_ascii=False),
            graph_view=compile_planner_view(self.graph, flat=not self.wiring.show_edges),
            protected=", ".join(sorted(self.graph.user_protected)),
        )
        payload = self.chat.complete(Role.GRAPH_MANAGER, prompt, schema="edits", key=key)
        if isinstance(payload, dict) and payload.get("refuse"):
            raise _ManagerRefusal(str(payload["refuse"]))
        rows = payload.get("edits", []) if isinstance(payload, dict) else payload
        return [edit_from_dict(r) for r in rows]

    def _emit_restructure(self, intent, report: RestructureReport, edits) -> None:
        if not report.committed:
            self.feedback.append(f"restructure {report.op_type} not applied: {report.reason} ({report.detail})")
        self.trajectory.emit(
            "restructure",
            action="propose_restructure",
            intent=intent.to_dict() if intent else None,
            report=report.to_dict(),
            edits=[edit_to_dict(e) for e in edits] if report.committed else [],
            structural=report.committed,
            content=False,
            digest=graph_digest(self.graph),
        )

    def apply_deadline(self, reason: str) -> None:
        self.deadline_hit = True
        self.graph, removed, retained = enforce_soft_deadline(self.graph)
        self.trajectory.emit(
            "deadline", reason=reason, removed=removed, retained_protected=retained,
            digest=graph_digest(self.graph),
        )

    # -- run --

    def loop(self) -> None:
        while True:
            if self.iterations >= self.budget.hard_ceiling:
                self.trajectory.emit("hard_ceiling", iterations=self.iterations)
                if not self.deadline_hit:
                    self.apply_deadline("hard_ceiling")
                return
            if not self.deadline_hit and self.deadline_due():
                self.apply_deadline("soft_deadline")
            self.iterations += 1
            self.trajectory.turn = self.iterations
            turn = self.next_turn()
            outcome = self.step(turn)
            if outcome.finished:
                return

    def write_report(self) -> Report | None:
        try:
            return write_report(self.graph, self.store, self.chat, self.config, self.transcript, self.wiring)
        except NoWritableContent as exc:
            self.trajectory.emit("report_skipped", reason=str(exc))
            return None
        finally:
            for ev in self.transcript.events:
                self.trajectory.emit("writing", layer=ev.layer, section=ev.section_id, message=ev.message, **ev.data)

    def run(self) -> RunResult:
        g = self.graph
        self.trajectory.emit(
            "parse", nodes=sorted(g.nodes), edges=sorted(g.edges), protected=sorted(g.user_protected),
            structure_type=g.structure_type.value, max_turn=self.budget.max_turn, ablations=list(self.wiring.ablations), digest=graph_digest(g),
        )
        self.loop()
        self.trajectory.turn = self.iterations + 1
        report = self.write_report()
        self.trajectory.emit(
            "finished",
            iterations=self.iterations,
            search_calls=self.search_calls,
            nodes=len(self.graph.nodes),
            evidence=len(self.store),
            report=report.summary() if report else None,
            store_ids=len(self.store),
        )
        return RunResult(self.graph, self.store, self.trajectory, report, self.transcript, self.iterations, self.search_calls)


class _ManagerRefusal(CognigraphError):
    pass


# --- report pipeline ----------------------------------------------------------


def write_report(
    graph: CognitiveGraph,
    store: EvidenceStore,
    chat: ChatBackend,
    config: RunConfig,
    transcript: Transcript,
    wiring: EngineWiring | None = None,
) -> Report:
    flat = wiring is not None and not wiring.show_edges
    view = compile_planner_view(graph, flat=flat)
    avail = availability_index(graph, store)
    prompt = render("outline", graph_view=view, availability=json.dumps(avail, ensure_ascii=False, indent=1))
    transcript.prompts.append(("outline", None, prompt))
    try:
        payload = chat.complete(Role.OUTLINE, prompt, schema="outline", key="outline")
        proposal = payload["sections"] if isinstance(payload, dict) else None
    except (BackendFailure, SchemaError, KeyError) as exc:
        transcript.note("OutlinePlanner", None, f"outline fell back to one section per node: {exc}")
        proposal = None
    sections = plan_outline(graph, store, proposal, config.outline_min_records, transcript)

    prior_claims: set[str] = set()
    prior_plans: list[str] = []
    written: list[tuple] = []
    insights_by_section: dict[int, list] = {}
    text_so_far = ""
    for sec in sections:
        nodes = [graph.nodes[n] for n in sec.relevant_node_ids]
        index = store.section_index(nodes)
        index_ids = {m for m, _ in index}
        l2 = render(
            "section_planner",
            section=json.dumps(sec.to_dict(), ensure_ascii=False),
            findings="\n".join(section_findings(graph, sec.relevant_node_ids)) or "(none)",
            index="\n".join(f"{m}\t{crit}" for m, crit in index),
            prior="\n".join(prior_plans) or "(none)",
        )
        transcript.prompts.append(("section_planner", sec.section_id, l2))
        try:
            payload = chat.complete(Role.SECTION_PLANNER, l2, schema="insights", key=str(sec.section_id))
            raw = payload["insights"] if isinstance(payload, dict) else payload
            insights = bind_insights(sec, raw, index_ids, prior_claims, transcript)
        except (InsufficientEvidence, BackendFailure, SchemaError, KeyError) as exc:
            transcript.note("SectionPlanner", sec.section_id, f"section {sec.section_id} dropped: {exc}")
            continue
        prior_plans += [f"§{sec.section_id}: {strip_markers(i.claim)}" for i in insights]
        quotes = bound_quotes(insights, store)
        l3 = render(
            "section_writer",
            section=json.dumps(sec.to_dict(), ensure_ascii=False),
            insights=json.dumps([i.to_dict() for i in insights], ensure_ascii=False, indent=1),
            quotes=json.dumps(quotes, ensure_ascii=False, indent=1),
            tail=previous_tail(text_so_far, config.tail_cap) or "(this is the first section)",
        )
        transcript.prompts.append(("section_writer", sec.section_id, l3))
        prose = None
        for _ in range(config.schema_retries + 1):
            try:
                prose = chat.complete(Role.SECTION_WRITER, l3, key=str(sec.section_id))
                break
            except BackendFailure as exc:
                transcript.note("SectionWriter", sec.section_id, f"writer retry: {exc}")
        if prose is None:
            transcript.note("SectionWriter", sec.section_id, f"section {sec.section_id} dropped after retries")
            continue
        prose = finalize_prose(sec, str(prose), insights, transcript)
        written.append((sec, prose))
        insights_by_section[sec.section_id] = insights
        text_so_far += "\n\n" + prose
    return assemble_report(graph.query or "Research report", written, store, insights_by_section)
