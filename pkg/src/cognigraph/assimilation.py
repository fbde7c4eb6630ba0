"""Interpretive update: fold an observation into node content without touching topology."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Protocol

from .deviation import PageRating, page_entry
from .errors import CognigraphError
from .evidence import EvidenceStore, RawEvidence
from .graph import (
    Barrier,
    Claim,
    CognitiveGraph,
    CognitiveState,
    ConceptNode,
    ContradictionRecord,
    Strength,
    strip_markers,
)

log = logging.getLogger(__name__)

# item categories that never become discovered items
DENY_CATEGORIES = frozenset({"person", "date", "event", "location", "metric"})
CROSS_ROUTE_CAP = 2


class TargetIsStart(CognigraphError):
    pass


class UnknownEdge(CognigraphError):
    pass


class FindingClass(str, Enum):
    CRITERION_SATISFYING = "criterion_satisfying"
    REDUNDANT = "redundant"
    CONTRADICTORY = "contradictory"
    UNEXPECTED = "unexpected"


@dataclass(frozen=True)
class Finding:
    criterion: str
    answer: str
    evidence_quote: str
    source_url: str
    attributed_item: str | None = None
    # storage key within the item (or cross label); defaults to the criterion
    attribute: str | None = None
    item_category: str | None = None
    ranking: tuple[str, ...] | None = None
    mentions: tuple[str, ...] = ()
    partial: bool = False
    relevant: bool = True
    evidence_id: int | None = None

    def __post_init__(self):
        if not self.answer.strip():
            raise ValueError("finding answer must be non-empty")

    @property
    def key(self) -> str:
        return self.attribute or self.criterion

    @property
    def is_item_level(self) -> bool:
        return bool(self.attributed_item) and self.item_category not in DENY_CATEGORIES

    def cited(self, text: str) -> str:
        return f"{text} [[{self.evidence_id}]]" if self.evidence_id is not None else text

    def stored_value(self) -> str | list[str]:
        if self.ranking:
            return [self.cited(x) for x in self.ranking]
        return self.cited(self.answer)

    def to_dict(self) -> dict:
        d = {
            "criterion": self.criterion,
            "answer": self.answer,
            "evidence_quote": self.evidence_quote,
            "source_url": self.source_url,
        }
        for k in ("attributed_item", "attribute", "item_category", "evidence_id"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        if self.ranking:
            d["ranking"] = list(self.ranking)
        if self.mentions:
            d["mentions"] = list(self.mentions)
        if self.partial:
            d["partial"] = True
        if not self.relevant:
            d["relevant"] = False
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(
            criterion=d["criterion"],
            answer=d["answer"],
            evidence_quote=d.get("evidence_quote", ""),
            source_url=d.get("source_url", ""),
            attributed_item=d.get("attributed_item"),
            attribute=d.get("attribute"),
            item_category=d.get("item_category"),
            ranking=tuple(d["ranking"]) if d.get("ranking") else None,
            mentions=tuple(d.get("mentions", ())),
            partial=bool(d.get("partial", False)),
            relevant=bool(d.get("relevant", True)),
            evidence_id=d.get("evidence_id"),
        )


@dataclass
class Observation:
    task_id: str
    target_node: str
    edge_id: str
    findings: list[Finding] = field(default_factory=list)
    page_scores: list[PageRating] = field(default_factory=list)
    accessibility_notes: list[tuple[str, Barrier, str]] = field(default_factory=list)
    unexpected_insights: list[tuple[str, str, str]] = field(default_factory=list)
    search_experience: list[str] = field(default_factory=list)
    psi: Strength = Strength.NONE
    finding_strength: Strength = Strength.NONE
    temporal_context: list[str] = field(default_factory=list)
    synthesis: str = ""
    queries: list[str] = field(default_factory=list)
    search_calls: int = 0

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "target_node": self.target_node,
            "edge_id": self.edge_id,
            "findings": [f.to_dict() for f in self.findings],
            "page_scores": [p.to_dict() for p in self.page_scores],
            "accessibility_notes": [[c, b.value, d] for c, b, d in self.accessibility_notes],
            "unexpected_insights": [list(u) for u in self.unexpected_insights],
            "search_experience": list(self.search_experience),
            "psi": self.psi.value,
            "finding_strength": self.finding_strength.value,
            "temporal_context": list(self.temporal_context),
            "synthesis": self.synthesis,
            "queries": list(self.queries),
            "search_calls": self.search_calls,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        return cls(
            task_id=d["task_id"],
            target_node=d["target_node"],
            edge_id=d["edge_id"],
            findings=[Finding.from_dict(f) for f in d.get("findings", [])],
            page_scores=[PageRating.from_dict(p) for p in d.get("page_scores", [])],
            accessibility_notes=[(c, Barrier(b), t) for c, b, t in d.get("accessibility_notes", [])],
            unexpected_insights=[tuple(u) for u in d.get("unexpected_insights", [])],  # type: ignore[misc]
            search_experience=list(d.get("search_experience", [])),
            psi=Strength(d.get("psi", "none")),
            finding_strength=Strength(d.get("finding_strength", "none")),
            temporal_context=list(d.get("temporal_context", [])),
            synthesis=d.get("synthesis", ""),
            queries=list(d.get("queries", [])),
            search_calls=int(d.get("search_calls", 0)),
        )


@dataclass
class NodeDelta:
    discovered_items: list[str] = field(default_factory=list)
    item_findings: list[tuple[str, str, str]] = field(default_factory=list)
    cross_item_findings: list[tuple[str, object]] = field(default_factory=list)
    contradictions: list[ContradictionRecord] = field(default_factory=list)
    unexpected: list[str] = field(default_factory=list)
    search_experience: list[str] = field(default_factory=list)
    core_pending: list[str] = field(default_factory=list)
    supplementary_pending: list[str] = field(default_factory=list)
    related_tasks: list[str] = field(default_factory=list)
    classes: list[FindingClass] = field(default_factory=list)
    pages: int = 0

    @property
    def grew(self) -> bool:
        return bool(self.item_findings or self.cross_item_findings)


@dataclass
class UpdateSet:
    entries: list[tuple[str, NodeDelta]] = field(default_factory=list)

    def delta(self, node_id: str) -> NodeDelta:
        for nid, d in self.entries:
            if nid == node_id:
                return d
        d = NodeDelta()
        self.entries.append((node_id, d))
        return d

    @property
    def node_ids(self) -> list[str]:
        return [nid for nid, _ in self.entries]

    def summary(self) -> dict:
        return {
            nid: {
                "findings": len(d.item_findings) + len(d.cross_item_findings),
                "contradictions": len(d.contradictions),
                "unexpected": len(d.unexpected),
                "classes": [c.value for c in d.classes],
            }
            for nid, d in self.entries
        }


# ---------------------------------------------------------------------------
# judgement surface
# ---------------------------------------------------------------------------


def _norm(text: str) -> str:
    return " ".join(strip_markers(text).split()).casefold()


class Judger(Protocol):
    def same(self, old: str | list[str], new: str | list[str]) -> bool: ...

    def covers(self, criterion: str, claims: list[Claim]) -> bool: ...

    def matches(self, finding: Finding, criteria: list[str]) -> bool: ...

    def resolve(self, criterion: str, old: str, new: str) -> tuple[str, str]: ...


class KeyJudger:
    """Deterministic judger: exact criterion keys and normalized text equality."""

    def same(self, old, new) -> bool:
        if isinstance(old, list) or isinstance(new, list):
            a = old if isinstance(old, list) else [old]
            b = new if isinstance(new, list) else [new]
            return [_norm(x) for x in a] == [_norm(x) for x in b]
        return _norm(old) == _norm(new)

    def covers(self, criterion: str, claims: list[Claim]) -> bool:
        return any(c.criterion == criterion and not c.partial for c in claims)

    def matches(self, finding: Finding, criteria: list[str]) -> bool:
        return finding.criterion in criteria

    def resolve(self, criterion: str, old: str, new: str) -> tuple[str, str]:
        return "new", "no judger rationale; newer claim retained by default"


def classify_finding(
    finding: Finding,
    node: ConceptNode,
    task_criteria: list[str],
    judger: Judger | None = None,
) -> FindingClass:
    judger = judger or KeyJudger()
    scope = list(task_criteria) + node.core_criteria + node.supplementary_criteria
    if not judger.matches(finding, scope):
        # the unexpected branch admits only material relevant to the question;
        # irrelevant off-criterion material adds nothing and is treated as redundant
        return FindingClass.UNEXPECTED if finding.relevant else FindingClass.REDUNDANT
    existing = _existing_value(node, finding)
    if existing is None:
        return FindingClass.CRITERION_SATISFYING
    if judger.same(existing, finding.stored_value()):
        return FindingClass.REDUNDANT
    return FindingClass.CONTRADICTORY


def _existing_value(node: ConceptNode, finding: Finding):
    """Latest value stored under the finding's key, following revision suffixes."""
    if finding.is_item_level:
        bucket = node.item_findings.get(finding.attributed_item or "", {})
    else:
        bucket = node.cross_item_findings
    key = finding.key
    if key not in bucket:
        return None
    k, latest = 2, bucket[key]
    while f"{key}#{k}" in bucket:
        latest = bucket[f"{key}#{k}"]
        k += 1
    return latest


def _free_key(bucket: dict, key: str) -> str:
    if key not in bucket:
        return key
    k = 2
    while f"{key}#{k}" in bucket:
        k += 1
    return f"{key}#{k}"


def reconcile_criteria(
    core: list[str],
    supplementary: list[str],
    findings: list[Claim],
    judger: Judger | None = None,
) -> tuple[list[str], list[str]]:
    judger = judger or KeyJudger()
    core_pending = [c for c in core if not judger.covers(c, findings)]
    supp_pending = [c for c in supplementary if not judger.covers(c, findings)]
    return core_pending, supp_pending


class CrossRouter:
    """Per-task cross-node router honouring at most ``cap`` distinct foreign destinations."""

    def __init__(self, cap: int = CROSS_ROUTE_CAP, judger: Judger | None = None):
        self.cap = cap
        self.judger = judger or KeyJudger()
        self.honored: list[str] = []
        self.declined: list[tuple[str, str]] = []

    def route(self, finding: Finding, graph: CognitiveGraph, default_target: str, task_criteria=()) -> str:
        target = graph.nodes[default_target]
        own = list(task_criteria) + target.core_criteria + target.supplementary_criteria
        if self.judger.matches(finding, own):
            return default_target
        for nid, node in graph.nodes.items():
            if nid == default_target or node.is_start:
                continue
            if self.judger.matches(finding, node.core_criteria + node.supplementary_criteria):
                if nid in self.honored:
                    return nid
                if len(self.honored) < self.cap:
                    self.honored.append(nid)
                    return nid
                self.declined.append((finding.criterion, nid))
                log.info("cross-route cap reached; %r stays on %s", finding.criterion, default_target)
                return default_target
        return default_target


def route_cross_node(finding: Finding, graph: CognitiveGraph, default_target: str, router: CrossRouter | None = None) -> str:
    return (router or CrossRouter()).route(finding, graph, default_target)


# ---------------------------------------------------------------------------
# evidence binding and the update operator
# ---------------------------------------------------------------------------


_LOCAL = re.compile(r"\[\[([1-9][0-9]*)\]\]")


def bind_evidence(observation: Observation, store: EvidenceStore) -> Observation:
    """Insert each finding's quote into the store and stamp the global id on it.

    Findings whose quote the store rejects are dropped. Local [[k]] markers in
    the synthesis (k = 1-based finding position) are rewritten to global ids.
    """
    raw = [
        RawEvidence(i, f.evidence_quote, f.answer, f.criterion, f.source_url)
        for i, f in enumerate(observation.findings, 1)
    ]
    remap = store.insert_batch(raw, observation.task_id)
    kept: list[Finding] = []
    for i, f in enumerate(observation.findings, 1):
        if i in remap:
            kept.append(replace(f, evidence_id=remap[i]))
        else:
            observation.search_experience.append(f"dropped finding on {f.criterion!r}: no usable quote")

    def sub(m: re.Match) -> str:
        k = int(m.group(1))
        return f"[[{remap[k]}]]" if k in remap else ""

    return replace(observation, findings=kept, synthesis=_LOCAL.sub(sub, observation.synthesis))


def _merge_unique(dst: list[str], items) -> list[str]:
    added = []
    for x in items:
        if x not in dst:
            dst.append(x)
            added.append(x)
    return added


def _store(node: ConceptNode, finding: Finding, delta: NodeDelta, task_id: str, revise: bool) -> None:
    value = finding.stored_value()
    if finding.is_item_level:
        item = finding.attributed_item or ""
        if item not in node.discovered_items:
            node.discovered_items.append(item)
            delta.discovered_items.append(item)
        bucket = node.item_findings.setdefault(item, {})
        key = _free_key(bucket, finding.key) if revise else finding.key
        bucket[key] = value  # type: ignore[assignment]
        delta.item_findings.append((item, key, value))  # type: ignore[arg-type]
        path: tuple[str, ...] = ("item", item, key)
    else:
        key = _free_key(node.cross_item_findings, finding.key) if revise else finding.key
        node.cross_item_findings[key] = value
        delta.cross_item_findings.append((key, value))
        path = ("cross", key)
    text = " > ".join(value) if isinstance(value, list) else value
    node.claims.append(Claim(finding.criterion, path, text, finding.partial, task_id))
    if finding.evidence_id is not None:
        node.cited_refs.add(finding.evidence_id)


def _window_barriers(node: ConceptNode, notes) -> list[Barrier]:
    seen = [p.barrier for p in node.quality_profile.page_window if p.barrier is not None]
    seen += [b for _, b, _ in notes]
    return list(dict.fromkeys(seen))


def _absorb_task_criteria(node: ConceptNode, core, supp) -> None:
    _merge_unique(node.core_criteria, core)
    _merge_unique(node.supplementary_criteria, [s for s in supp if s not in node.core_criteria])


def assimilate(
    graph: CognitiveGraph,
    observation: Observation,
    *,
    judger: Judger | None = None,
    router: CrossRouter | None = None,
) -> tuple[CognitiveGraph, UpdateSet]:
    """Apply one observation in place; returns the graph and the update set."""
    judger = judger or KeyJudger()
    router = router or CrossRouter(judger=judger)
    target = graph.nodes.get(observation.target_node)
    if target is None:
        raise CognigraphError(f"unknown target node {observation.target_node!r}")
    if target.is_start:
        raise TargetIsStart(observation.target_node)
    edge = graph.edges.get(observation.edge_id)
    if edge is None:
        raise UnknownEdge(observation.edge_id)
    task_id = observation.task_id
    task_criteria = edge.core_criteria + edge.supplementary_criteria
    _absorb_task_criteria(target, edge.core_criteria, edge.supplementary_criteria)

    update = UpdateSet()
    tdelta = update.delta(target.id)
    target.related_tasks.add(task_id)
    tdelta.related_tasks.append(task_id)

    for f in observation.findings:
        dest_id = router.route(f, graph, target.id, task_criteria)
        dest = graph.nodes[dest_id]
        delta = update.delta(dest_id)
        if task_id not in dest.related_tasks:
            dest.related_tasks.add(task_id)
            delta.related_tasks.append(task_id)
        scope = task_criteria if dest_id == target.id else []
        cls = classify_finding(f, dest, scope, judger)
        delta.classes.append(cls)
        # mentioned items are discovered regardless of how the finding is classed
        delta.discovered_items += _merge_unique(dest.discovered_items, f.mentions)
        if cls is FindingClass.REDUNDANT:
            continue
        if cls is FindingClass.UNEXPECTED:
            text = f.cited(f"{f.key}: {f.answer}")
            dest.unexpected_discoveries.append(text)
            delta.unexpected.append(text)
            if f.evidence_id is not None:
                dest.cited_refs.add(f.evidence_id)
            continue
        if cls is FindingClass.CONTRADICTORY:
            old = _existing_value(dest, f)
            old_text = " > ".join(old) if isinstance(old, list) else old
            new = f.stored_value()
            new_text = " > ".join(new) if isinstance(new, list) else new
            kept, why = judger.resolve(f.criterion, old_text, new_text)
            rec = ContradictionRecord(f.criterion, old_text, new_text, why, kept)
            dest.contradictions.append(rec)
            delta.contradictions.append(rec)
            if f.evidence_id is not None:
                dest.cited_refs.add(f.evidence_id)
            if kept == "new":
                _store(dest, f, delta, task_id, revise=True)
            continue
        _store(dest, f, delta, task_id, revise=False)

    for label, insight, evidence in observation.unexpected_insights:
        text = f"{label}: {insight}" + (f" ({evidence})" if evidence else "")
        target.unexpected_discoveries.append(text)
        tdelta.unexpected.append(text)

    target.search_experience.extend(observation.search_experience)
    tdelta.search_experience.extend(observation.search_experience)

    qp = target.quality_profile
    for rating in observation.page_scores:
        qp.page_window.append(page_entry(rating))
    tdelta.pages = len(observation.page_scores)
    qp.accessibility_barriers = _window_barriers(target, observation.accessibility_notes)
    if observation.page_scores or observation.findings:
        qp.unexpected_strength = observation.psi
        qp.finding_strength = observation.finding_strength

    if observation.temporal_context:
        parts = [p for p in target.temporal_notes.split("; ") if p]
        _merge_unique(parts, observation.temporal_context)
        target.temporal_notes = "; ".join(parts)

    for nid, delta in update.entries:
        node = graph.nodes[nid]
        node.core_pending, node.supplementary_pending = reconcile_criteria(
            node.core_criteria, node.supplementary_criteria, node.live_claims(), judger
        )
        delta.core_pending = list(node.core_pending)
        delta.supplementary_pending = list(node.supplementary_pending)
        node.refresh_state()
    return graph, update


UNASSESSED = "coverage not assessed"


def concat_assimilate(graph: CognitiveGraph, observation: Observation) -> tuple[CognitiveGraph, UpdateSet]:
    """Ablated update: append the raw searcher output to the target without interpretation.

    No residue is ever cleared, so nodes can reach Partial but never Known.
    """
    target = graph.nodes.get(observation.target_node)
    if target is None:
        raise CognigraphError(f"unknown target node {observation.target_node!r}")
    if target.is_start:
        raise TargetIsStart(observation.target_node)
    edge = graph.edges.get(observation.edge_id)
    if edge is None:
        raise UnknownEdge(observation.edge_id)
    _absorb_task_criteria(target, edge.core_criteria, edge.supplementary_criteria)
    update = UpdateSet()
    delta = update.delta(target.id)
    target.related_tasks.add(observation.task_id)
    delta.related_tasks.append(observation.task_id)
    parts = [f.cited(f.answer) for f in observation.findings]
    if observation.synthesis:
        parts.append(observation.synthesis)
    if parts:
        label = _free_key(target.cross_item_findings, f"output {observation.task_id}")
        text = "\n".join(parts)
        target.cross_item_findings[label] = text
        target.claims.append(Claim("", ("cross", label), text, True, observation.task_id))
        delta.cross_item_findings.append((label, text))
        target.cited_refs |= {f.evidence_id for f in observation.findings if f.evidence_id is not None}
    target.search_experience.extend(observation.search_experience)
    for rating in observation.page_scores:
        target.quality_profile.page_window.append(page_entry(rating))
    target.quality_profile.accessibility_barriers = _window_barriers(target, observation.accessibility_notes)
    target.core_pending = list(target.core_criteria) or [UNASSESSED]
    target.supplementary_pending = list(target.supplementary_criteria)
    target.refresh_state()
    assert target.cognitive_state is not CognitiveState.KNOWN
    delta.core_pending = list(target.core_pending)
    return graph, update
