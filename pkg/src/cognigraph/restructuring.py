"""Schema revision: operator patterns over the primitive edit alphabet, with a two-phase safety protocol."""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Union

from .assimilation import KeyJudger, reconcile_criteria
from .errors import CognigraphError
from .graph import (
    CognitiveGraph,
    ConceptNode,
    GraphError,
    NodeType,
    RelationEdge,
    TaskType,
    recompute_hops,
)

log = logging.getLogger(__name__)

MAX_REPAIR_ROUNDS = 5


class OpType(str, Enum):
    CONC = "conc"
    AUG = "aug"
    PIVOT = "pivot"
    PRUNE = "prune"
    CORRECT = "correct"


class PatternMismatch(CognigraphError):
    pass


class DownstreamViolation(CognigraphError):
    pass


class NeedsRollback(CognigraphError):
    def __init__(self, rounds: int, orphans: set[str]):
        super().__init__(f"{len(orphans)} orphan(s) left after {rounds} rounds: {sorted(orphans)}")
        self.rounds = rounds
        self.orphans = orphans


class RefusalReason(str, Enum):
    PROTECTED_NODE_DELETION = "protected_node_deletion"
    NON_EMPTY_FINDINGS_DELETION = "non_empty_findings_deletion"
    DIFFICULTY_RATIONALE = "difficulty_rationale"
    AGGREGATION_ONLY_NODE = "aggregation_only_node"
    CONTRADICTS_EVIDENCE = "contradicts_evidence"
    ABSENT_ITEM = "absent_item"


@dataclass(frozen=True)
class Refusal:
    reason: RefusalReason
    detail: str


@dataclass
class RestructureIntent:
    op_type: OpType
    rationale: str = ""
    focus: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RestructureIntent":
        op = str(d["op_type"]).lower()
        try:
            op_type = OpType(op)
        except ValueError:
            raise PatternMismatch(f"operator {d['op_type']!r} is not a restructuring operator") from None
        return cls(op_type, d.get("rationale", ""), d.get("focus"))

    def to_dict(self) -> dict:
        return {"op_type": self.op_type.value, "rationale": self.rationale, "focus": self.focus}


# --- edit alphabet ---------------------------------------------------------


@dataclass(frozen=True)
class AddNode:
    spec: dict

    @property
    def node_id(self) -> str:
        return self.spec["id"]


@dataclass(frozen=True)
class AddEdge:
    spec: dict

    @property
    def source(self) -> str:
        return self.spec["source"]

    @property
    def target(self) -> str:
        return self.spec["target"]


@dataclass(frozen=True)
class RemoveNode:
    node_id: str


@dataclass(frozen=True)
class ModifyNode:
    node_id: str
    patches: dict = field(default_factory=dict)
    remove_items: frozenset = frozenset()


@dataclass(frozen=True)
class ModifyEdge:
    edge_id: str
    patches: dict = field(default_factory=dict)


Edit = Union[AddNode, AddEdge, RemoveNode, ModifyNode, ModifyEdge]

NODE_PATCHABLE = {"name", "type_constraint", "condition_constraints", "core_criteria", "supplementary_criteria"}
EDGE_PATCHABLE = {"inquiry_goal", "core_criteria", "supplementary_criteria", "task_type", "specified_source", "relation"}
CORRECT_NODE_FIELDS = {"type_constraint", "condition_constraints", "core_criteria", "supplementary_criteria"}
CORRECT_EDGE_FIELDS = {"inquiry_goal", "core_criteria", "supplementary_criteria"}


def edit_from_dict(d: dict) -> Edit:
    kind = d.get("op")
    if kind == "add_node":
        return AddNode(dict(d["node"]))
    if kind == "add_edge":
        return AddEdge(dict(d["edge"]))
    if kind == "remove_node":
        return RemoveNode(d["id"])
    if kind == "modify_node":
        return ModifyNode(d["id"], dict(d.get("patches", {})), frozenset(d.get("remove_items", ())))
    if kind == "modify_edge":
        return ModifyEdge(d["id"], dict(d.get("patches", {})))
    raise PatternMismatch(f"unknown edit primitive {kind!r}")


def edit_to_dict(e: Edit) -> dict:
    if isinstance(e, AddNode):
        return {"op": "add_node", "node": e.spec}
    if isinstance(e, AddEdge):
        return {"op": "add_edge", "edge": e.spec}
    if isinstance(e, RemoveNode):
        return {"op": "remove_node", "id": e.node_id}
    if isinstance(e, ModifyNode):
        return {"op": "modify_node", "id": e.node_id, "patches": e.patches, "remove_items": sorted(e.remove_items)}
    return {"op": "modify_edge", "id": e.edge_id, "patches": e.patches}


_seq = itertools.count(1)


@dataclass
class Snapshot:
    graph: CognitiveGraph
    seq: int

    @classmethod
    def take(cls, graph: CognitiveGraph) -> "Snapshot":
        return cls(graph.copy(), next(_seq))

    def restore(self) -> CognitiveGraph:
        return self.graph.copy()


# --- phase 0: pattern compilation -----------------------------------------


def _split(edits: list[Edit]):
    adds = [e for e in edits if isinstance(e, AddNode)]
    links = [e for e in edits if isinstance(e, AddEdge)]
    removes = [e for e in edits if isinstance(e, RemoveNode)]
    mods = [e for e in edits if isinstance(e, ModifyNode)]
    emods = [e for e in edits if isinstance(e, ModifyEdge)]
    return adds, links, removes, mods, emods


def _check_migration(graph: CognitiveGraph, adds: list[AddNode], removes: list[RemoveNode]) -> None:
    added_criteria: set[str] = set()
    for a in adds:
        added_criteria |= set(a.spec.get("core_criteria", [])) | set(a.spec.get("supplementary_criteria", []))
    for r in removes:
        node = graph.nodes.get(r.node_id)
        if node is None:
            continue
        lost = [c for c in node.core_criteria + node.supplementary_criteria if c not in added_criteria]
        if lost:
            raise PatternMismatch(f"criteria of removed node {r.node_id} not migrated: {lost}")


def _check_patches(patches: dict, allowed: set[str], what: str) -> None:
    bad = set(patches) - allowed
    if bad:
        raise PatternMismatch(f"{what} patch touches non-editable fields {sorted(bad)}")


def compile_intent(intent: RestructureIntent, graph: CognitiveGraph, realization: list[Edit]) -> list[Edit]:
    """Check that ``realization`` has the characteristic shape of ``intent.op_type``."""
    adds, links, removes, mods, emods = _split(realization)
    new_ids = {a.node_id for a in adds}
    focus = intent.focus
    op = intent.op_type

    for m in mods:
        _check_patches(m.patches, NODE_PATCHABLE, f"node {m.node_id}")
    for m in emods:
        _check_patches(m.patches, EDGE_PATCHABLE, f"edge {m.edge_id}")

    if op is OpType.PRUNE:
        if len(removes) != 1 or len(realization) != 1:
            raise PatternMismatch("prune is exactly one node removal")
        if focus and removes[0].node_id != focus:
            raise PatternMismatch("prune must remove its focus node")
        return realization

    if op is OpType.CORRECT:
        if adds or links or removes:
            raise PatternMismatch("correct may only modify existing nodes and edges")
        if not focus or focus not in graph.nodes:
            raise PatternMismatch("correct needs an existing focus node")
        scope = graph.descendants(focus) | {focus}
        for m in mods:
            if m.node_id not in scope:
                raise DownstreamViolation(f"node {m.node_id} is outside the downstream set of {focus}")
            if m.remove_items:
                raise PatternMismatch("correct may not remove findings")
            _check_patches(m.patches, CORRECT_NODE_FIELDS, f"node {m.node_id}")
        for m in emods:
            edge = graph.edges.get(m.edge_id)
            if edge is None or edge.target not in scope:
                raise DownstreamViolation(f"edge {m.edge_id} is outside the downstream set of {focus}")
            _check_patches(m.patches, CORRECT_EDGE_FIELDS, f"edge {m.edge_id}")
        return realization

    if not adds:
        raise PatternMismatch(f"{op.value} must add at least one node")
    for link in links:
        if link.source not in new_ids and link.target not in new_ids:
            raise PatternMismatch(f"edge {link.spec.get('id')} does not touch an added node")
    for nid in new_ids:
        if not any(link.target == nid for link in links):
            raise PatternMismatch(f"added node {nid} has no incoming edge")
    if emods:
        raise PatternMismatch(f"{op.value} does not modify edges")

    if op is OpType.AUG:
        if len(adds) != 1 or removes or mods:
            raise PatternMismatch("aug adds exactly one node and only edges")
        return realization

    if op is OpType.CONC:
        if not focus or focus not in graph.nodes:
            raise PatternMismatch("conc needs an existing focus node")
        from_parent = [link for link in links if link.source == focus and link.target in new_ids]
        if len(from_parent) != len(adds):
            raise PatternMismatch("conc links every new node once from the focus")
        downstream = graph.descendants(focus)
        for r in removes:
            if r.node_id not in downstream:
                raise PatternMismatch(f"conc may only remove placeholders under {focus}")
        for m in mods:
            if m.node_id != focus:
                raise PatternMismatch("conc may only modify its focus")
        _check_migration(graph, adds, removes)
        return realization

    # pivot
    if len(links) != len(adds):
        raise PatternMismatch("pivot adds one edge per new node")
    for m in mods:
        if focus is None or m.node_id != focus:
            raise PatternMismatch("pivot may only modify its focus")
    _check_migration(graph, adds, removes)
    return realization


# --- phase 0b: refusal rubric ---------------------------------------------

_DIFFICULTY = re.compile(
    r"\b(search(es|ing)? (has|have|was|were|is|are)( been)? (difficult|hard|unproductive|fruitless))"
    r"|\b(hard|difficult) to (find|search|locate)\b"
    r"|\b(no|few|little|insufficient) (results|evidence) (found|available)\b",
    re.IGNORECASE,
)


def cites_difficulty(rationale: str) -> bool:
    return bool(_DIFFICULTY.search(rationale or ""))


def validate_edits(
    edits: list[Edit],
    graph: CognitiveGraph,
    rationale: str = "",
    evidence_check: Callable[[list[Edit], CognitiveGraph], str | None] | None = None,
) -> Refusal | None:
    """Return ``None`` when acceptable, otherwise the first refusal found."""
    if cites_difficulty(rationale):
        return Refusal(RefusalReason.DIFFICULTY_RATIONALE, rationale)
    for e in edits:
        if isinstance(e, RemoveNode):
            node = graph.nodes.get(e.node_id)
            if e.node_id in graph.user_protected or (node is not None and node.is_start):
                return Refusal(RefusalReason.PROTECTED_NODE_DELETION, e.node_id)
            if node is not None and node.has_findings:
                return Refusal(RefusalReason.NON_EMPTY_FINDINGS_DELETION, e.node_id)
        elif isinstance(e, ModifyNode) and e.remove_items:
            node = graph.nodes.get(e.node_id)
            present = set(node.item_findings) if node else set()
            missing = sorted(set(e.remove_items) - present)
            if missing:
                return Refusal(RefusalReason.ABSENT_ITEM, f"{e.node_id}: {missing}")
        elif isinstance(e, AddNode):
            if not e.spec.get("core_criteria") and not e.spec.get("supplementary_criteria"):
                return Refusal(RefusalReason.AGGREGATION_ONLY_NODE, e.node_id)
    if evidence_check is not None:
        detail = evidence_check(edits, graph)
        if detail:
            return Refusal(RefusalReason.CONTRADICTS_EVIDENCE, detail)
    return None


# --- phase 1: surgical edit -----------------------------------------------


def _node_from_spec(spec: dict) -> ConceptNode:
    core = list(spec.get("core_criteria", []))
    supp = list(spec.get("supplementary_criteria", []))
    return ConceptNode(
        id=spec["id"],
        name=spec.get("name", spec["id"]),
        node_type=NodeType(spec.get("node_type", "discovered")),
        type_constraint=spec.get("type_constraint", ""),
        condition_constraints=list(spec.get("condition_constraints", [])),
        discovery_dependency=set(spec.get("discovery_dependency", [])),
        core_criteria=core,
        supplementary_criteria=supp,
        core_pending=list(core),
        supplementary_pending=list(supp),
    )


def _edge_from_spec(spec: dict) -> RelationEdge:
    return RelationEdge(
        id=spec["id"],
        source=spec["source"],
        target=spec["target"],
        relation=spec.get("relation", ""),
        inquiry_goal=spec.get("inquiry_goal", ""),
        core_criteria=list(spec.get("core_criteria", [])),
        supplementary_criteria=list(spec.get("supplementary_criteria", [])),
        task_type=TaskType(spec.get("task_type", "open")),
        specified_source=spec.get("specified_source"),
    )


def _rederive(node: ConceptNode) -> None:
    node.core_pending, node.supplementary_pending = reconcile_criteria(
        node.core_criteria, node.supplementary_criteria, node.live_claims(), KeyJudger()
    )
    node.refresh_state()


def apply_phase1(edits: list[Edit], graph: CognitiveGraph) -> CognitiveGraph:
    """Apply edits in order, in place. Raises GraphError on structural inconsistency."""
    for e in edits:
        if isinstance(e, AddNode):
            graph.add_node(_node_from_spec(e.spec))
        elif isinstance(e, AddEdge):
            graph.add_edge(_edge_from_spec(e.spec))
        elif isinstance(e, RemoveNode):
            if e.node_id not in graph.nodes:
                raise GraphError(f"cannot remove missing node {e.node_id}")
            graph.remove_node(e.node_id)
        elif isinstance(e, ModifyNode):
            node = graph.nodes.get(e.node_id)
            if node is None:
                raise GraphError(f"cannot modify missing node {e.node_id}")
            for k, v in e.patches.items():
                setattr(node, k, list(v) if isinstance(v, (list, tuple)) else v)
            for item in e.remove_items:
                node.item_findings.pop(item, None)
            _rederive(node)
        elif isinstance(e, ModifyEdge):
            edge = graph.edges.get(e.edge_id)
            if edge is None:
                raise GraphError(f"cannot modify missing edge {e.edge_id}")
            for k, v in e.patches.items():
                if k == "task_type":
                    v = TaskType(v)
                setattr(edge, k, list(v) if isinstance(v, (list, tuple)) else v)
    return graph


# --- phase 2: orphan repair -----------------------------------------------

Proposer = Callable[[CognitiveGraph, set, int], list[AddEdge]]


def nearest_ancestor_policy(reference: CognitiveGraph) -> Proposer:
    """Attach each orphan to its closest surviving ancestor in ``reference``."""

    def propose(graph: CognitiveGraph, orphans: set, round_no: int) -> list[AddEdge]:
        live = graph.reachable()
        proposals: list[AddEdge] = []
        for orphan in sorted(orphans, key=lambda n: (reference.nodes[n].hop_distance or 0) if n in reference.nodes else 0):
            frontier = [e.source for e in reference.incoming(orphan)]
            seen: set[str] = set()
            while frontier:
                nxt: list[str] = []
                for cand in frontier:
                    if cand in seen:
                        continue
                    seen.add(cand)
                    if cand in live and cand in graph.nodes:
                        proposals.append(
                            AddEdge({"id": f"bridge_{cand}_{orphan}", "source": cand, "target": orphan, "relation": "reattached"})
                        )
                        live |= {orphan}
                        nxt = []
                        break
                    nxt.extend(e.source for e in reference.incoming(cand))
                frontier = nxt
        return proposals

    return propose


def repair_orphans(
    graph: CognitiveGraph,
    proposer: Proposer | None = None,
    max_rounds: int = MAX_REPAIR_ROUNDS,
) -> tuple[CognitiveGraph, int, list[str]]:
    """Reconnect unreachable nodes; returns (graph, rounds used, added edge ids)."""
    orphans = graph.unreachable()
    if not orphans:
        return graph, 0, []
    proposer = proposer or nearest_ancestor_policy(graph.copy())
    added: list[str] = []
    for round_no in range(1, max_rounds + 1):
        for proposal in proposer(graph, set(orphans), round_no):
            spec = dict(proposal.spec)
            if spec.get("id") in graph.edges:
                spec["id"] = graph.next_dynamic_id("r")
            try:
                graph.add_edge(_edge_from_spec(spec))
                added.append(spec["id"])
            except GraphError as exc:
                log.info("repair round %d: proposal rejected (%s)", round_no, exc)
        orphans = graph.unreachable()
        if not orphans:
            return graph, round_no, added
    raise NeedsRollback(max_rounds, orphans)


# --- driver -----------------------------------------------------------------


@dataclass
class RestructureReport:
    op_type: str
    added: int = 0
    removed: int = 0
    violations: int = 0
    rounds: int = 0
    rolled_back: bool = False
    committed: bool = False
    reason: str | None = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)

    def line(self) -> str:
        return f"op={self.op_type} added={self.added} removed={self.removed} violations={self.violations}"


def invariant_violations(before: CognitiveGraph, after: CognitiveGraph, edits: list[Edit]) -> list[str]:
    """I1 and I2 over surviving nodes; remove_items keys are the only exemption."""
    problems: list[str] = []
    exempt: dict[str, set[str]] = {}
    for e in edits:
        if isinstance(e, ModifyNode):
            exempt.setdefault(e.node_id, set()).update(e.remove_items)
    for nid, old in before.nodes.items():
        new = after.nodes.get(nid)
        if new is None:
            if old.has_findings:
                problems.append(f"I1: node {nid} with findings removed")
            continue
        skip = exempt.get(nid, set())
        want = {p for p in old.finding_pairs() if not (p[0] == "item" and p[1] in skip)}
        if not want <= new.finding_pairs():
            problems.append(f"I1: findings of {nid} altered")
    missing = before.user_protected - set(after.nodes)
    if missing:
        problems.append(f"I2: protected nodes removed {sorted(missing)}")
    if not after.user_protected <= set(after.nodes):
        problems.append("I2: protected set references missing nodes")
    return problems


def restructure(
    intent: RestructureIntent,
    realization: list[Edit],
    graph: CognitiveGraph,
    *,
    proposer: Proposer | None = None,
    allowed_ops: set[OpType] | None = None,
    evidence_check=None,
) -> tuple[CognitiveGraph, RestructureReport]:
    """Run the full protocol. On any failure the returned graph is a copy of the snapshot."""
    snap = Snapshot.take(graph)
    report = RestructureReport(op_type=intent.op_type.value)
    adds, _, removes, _, _ = _split(realization)

    def fail(reason: str, detail: str, rolled_back: bool = False):
        report.reason = reason
        report.detail = detail
        report.rolled_back = rolled_back
        log.info("restructure %s refused: %s (%s)", intent.op_type.value, reason, detail)
        return snap.restore(), report

    if allowed_ops is not None and intent.op_type not in allowed_ops:
        return fail("blocked_by_ablation", f"{intent.op_type.value} not in {sorted(o.value for o in allowed_ops)}")
    try:
        compile_intent(intent, graph, realization)
    except DownstreamViolation as exc:
        return fail("downstream_violation", str(exc))
    except PatternMismatch as exc:
        return fail("pattern_mismatch", str(exc))
    refusal = validate_edits(realization, graph, intent.rationale, evidence_check)
    if refusal is not None:
        return fail(refusal.reason.value, refusal.detail)

    work = snap.restore()
    try:
        apply_phase1(realization, work)
    except GraphError as exc:
        return fail("inconsistent_edit", str(exc), rolled_back=True)
    try:
        work, rounds, bridges = repair_orphans(work, proposer or nearest_ancestor_policy(snap.graph))
    except NeedsRollback as exc:
        report.rounds = exc.rounds
        return fail("orphan_repair_failed", str(exc), rolled_back=True)
    recompute_hops(work)
    problems = invariant_violations(snap.graph, work, realization)
    if problems:
        report.violations = len(problems)
        return fail("invariant_violation", "; ".join(problems), rolled_back=True)

    report.added = len(adds)
    report.removed = len(removes)
    report.rounds = rounds
    report.committed = True
    if bridges:
        report.detail = f"bridges: {', '.join(bridges)}"
    log.info("[Restructure] %s", report.line())
    return work, report
