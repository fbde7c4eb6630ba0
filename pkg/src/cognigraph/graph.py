"""Cognitive graph data model: nodes, edges, state machines and the planner view."""

from __future__ import annotations

import copy
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .errors import CognigraphError

SCHEMA_VERSION = 1
MAX_ATTEMPTS = 3
WINDOW_CAPACITY = 50

_MARKER = re.compile(r"\[\[([1-9][0-9]*)\]\]")


class IllegalTransition(CognigraphError):
    pass


class GraphError(CognigraphError):
    pass


class CognitiveState(str, Enum):
    START = "start"
    UNKNOWN = "unknown"
    PARTIAL = "partial"
    KNOWN = "known"


class EdgeStatus(str, Enum):
    TO_SOLVE = "to_solve"
    INVESTIGATING = "investigating"
    SOLVED = "solved"
    EXHAUSTED = "exhausted"


class NodeType(str, Enum):
    START = "start"
    PLACEHOLDER = "placeholder"
    DISCOVERED = "discovered"


class Strength(str, Enum):
    """Four-level ordinal used for finding strength and unexpected strength (psi)."""

    NONE = "none"
    WEAK = "weak"
    MODERATE = "moderate"
    STRONG = "strong"

    @property
    def rank(self) -> int:
        return _STRENGTH_ORDER.index(self)

    def __ge__(self, other):  # type: ignore[override]
        if not isinstance(other, Strength):
            return NotImplemented
        return self.rank >= other.rank

    def __lt__(self, other):  # type: ignore[override]
        if not isinstance(other, Strength):
            return NotImplemented
        return self.rank < other.rank


_STRENGTH_ORDER = [Strength.NONE, Strength.WEAK, Strength.MODERATE, Strength.STRONG]


class Barrier(str, Enum):
    PAYWALL = "paywall"
    LOGIN_REQUIRED = "login_required"
    REQUIRES_DOWNLOAD = "requires_download"
    DYNAMIC_LOAD = "dynamic_load"


class StructureType(str, Enum):
    SERIAL = "serial"
    PARALLEL = "parallel"
    CONVERGENCE = "convergence"
    MIXED = "mixed"


class TaskType(str, Enum):
    OPEN = "open"
    SPECIFIED = "specified"


def citation_markers(text: str) -> list[int]:
    return [int(m) for m in _MARKER.findall(text)]


def strip_markers(text: str) -> str:
    return _MARKER.sub("", text)


# ---------------------------------------------------------------------------
# content records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PageEntry:
    """One retrieved page in a node's rolling window.

    Inaccessible pages carry a barrier and no composites.
    """

    cr: float | None
    aap: float | None
    barrier: Barrier | None = None

    @property
    def accessible(self) -> bool:
        return self.barrier is None


@dataclass
class QualityProfile:
    page_window: deque = field(default_factory=lambda: deque(maxlen=WINDOW_CAPACITY))
    finding_strength: Strength = Strength.NONE
    unexpected_strength: Strength = Strength.NONE
    accessibility_barriers: list[Barrier] = field(default_factory=list)

    def _composites(self) -> list[tuple[float, float]]:
        return [(p.cr, p.aap) for p in self.page_window if p.accessible]

    @property
    def mean_cr(self) -> float | None:
        comps = self._composites()
        return sum(c for c, _ in comps) / len(comps) if comps else None

    @property
    def mean_aap(self) -> float | None:
        comps = self._composites()
        return sum(a for _, a in comps) / len(comps) if comps else None

    @property
    def min_cr(self) -> float | None:
        comps = self._composites()
        return min(c for c, _ in comps) if comps else None

    @property
    def min_aap(self) -> float | None:
        comps = self._composites()
        return min(a for _, a in comps) if comps else None

    @property
    def phi(self) -> bool:
        return bool(self.accessibility_barriers)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_cr": self.mean_cr,
            "mean_aap": self.mean_aap,
            "min_cr": self.min_cr,
            "min_aap": self.min_aap,
            "finding_strength": self.finding_strength.value,
            "unexpected_strength": self.unexpected_strength.value,
            "accessibility_barriers": [b.value for b in self.accessibility_barriers],
            "page_window": [
                [p.cr, p.aap, p.barrier.value if p.barrier else None] for p in self.page_window
            ],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QualityProfile":
        window = deque(
            (PageEntry(cr, aap, Barrier(b) if b else None) for cr, aap, b in d.get("page_window", [])),
            maxlen=WINDOW_CAPACITY,
        )
        return cls(
            page_window=window,
            finding_strength=Strength(d.get("finding_strength", "none")),
            unexpected_strength=Strength(d.get("unexpected_strength", "none")),
            accessibility_barriers=[Barrier(b) for b in d.get("accessibility_barriers", [])],
        )


@dataclass
class ContradictionRecord:
    criterion: str
    old_claim: str
    new_claim: str
    resolution: str
    kept: str  # "old" | "new"

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Claim:
    """Flat, append-only ledger entry behind the two-level finding containers.

    ``path`` locates the stored value: ("item", item, attribute) or ("cross", label).
    """

    criterion: str
    path: tuple[str, ...]
    text: str
    partial: bool = False
    task_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion": self.criterion,
            "path": list(self.path),
            "text": self.text,
            "partial": self.partial,
            "task_id": self.task_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Claim":
        return cls(d["criterion"], tuple(d["path"]), d["text"], d.get("partial", False), d.get("task_id", ""))


@dataclass
class ConceptNode:
    id: str
    name: str
    node_type: NodeType = NodeType.PLACEHOLDER
    hop_distance: int | None = None
    discovery_dependency: set[str] = field(default_factory=set)
    type_constraint: str = ""
    condition_constraints: list[str] = field(default_factory=list)
    core_criteria: list[str] = field(default_factory=list)
    supplementary_criteria: list[str] = field(default_factory=list)
    core_pending: list[str] = field(default_factory=list)
    supplementary_pending: list[str] = field(default_factory=list)
    discovered_items: list[str] = field(default_factory=list)
    item_findings: dict[str, dict[str, str]] = field(default_factory=dict)
    cross_item_findings: dict[str, str | list[str]] = field(default_factory=dict)
    cognitive_state: CognitiveState = CognitiveState.UNKNOWN
    quality_profile: QualityProfile = field(default_factory=QualityProfile)
    contradictions: list[ContradictionRecord] = field(default_factory=list)
    unexpected_discoveries: list[str] = field(default_factory=list)
    temporal_notes: str = ""
    related_tasks: set[str] = field(default_factory=set)
    cited_refs: set[int] = field(default_factory=set)
    search_experience: list[str] = field(default_factory=list)
    claims: list[Claim] = field(default_factory=list)

    def __post_init__(self):
        if self.node_type is NodeType.START:
            self.cognitive_state = CognitiveState.START

    @property
    def is_start(self) -> bool:
        return self.node_type is NodeType.START

    @property
    def has_findings(self) -> bool:
        return bool(self.item_findings) or bool(self.cross_item_findings)

    def finding_values(self) -> list[str]:
        out: list[str] = []
        for attrs in self.item_findings.values():
            out.extend(attrs.values())
        for v in self.cross_item_findings.values():
            out.extend(v if isinstance(v, list) else [v])
        return out

    def has_path(self, path: tuple[str, ...]) -> bool:
        if path[0] == "item":
            return path[2] in self.item_findings.get(path[1], {})
        return path[1] in self.cross_item_findings

    def live_claims(self) -> list[Claim]:
        """Claims whose stored value still exists (item removal retracts them)."""
        return [c for c in self.claims if self.has_path(c.path)]

    def finding_pairs(self) -> set[tuple[str, ...]]:
        """Every stored (container path..., value) tuple; used by I1 checks."""
        pairs: set[tuple[str, ...]] = set()
        for item, attrs in self.item_findings.items():
            for attr, v in attrs.items():
                pairs.add(("item", item, attr, v))
        for label, v in self.cross_item_findings.items():
            if isinstance(v, list):
                for i, x in enumerate(v):
                    pairs.add(("cross", label, str(i), x))
            else:
                pairs.add(("cross", label, v))
        return pairs

    def refresh_state(self) -> CognitiveState:
        if not self.is_start:
            self.cognitive_state = compute_state(self.core_pending, self.has_findings)
        return self.cognitive_state

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "node_type": self.node_type.value,
            "hop_distance": self.hop_distance,
            "discovery_dependency": sorted(self.discovery_dependency),
            "type_constraint": self.type_constraint,
            "condition_constraints": list(self.condition_constraints),
            "core_criteria": list(self.core_criteria),
            "supplementary_criteria": list(self.supplementary_criteria),
            "core_pending": list(self.core_pending),
            "supplementary_pending": list(self.supplementary_pending),
            "discovered_items": list(self.discovered_items),
            "item_findings": copy.deepcopy(self.item_findings),
            "cross_item_findings": copy.deepcopy(self.cross_item_findings),
            "cognitive_state": self.cognitive_state.value,
            "quality_profile": self.quality_profile.to_dict(),
            "contradictions": [c.to_dict() for c in self.contradictions],
            "unexpected_discoveries": list(self.unexpected_discoveries),
            "temporal_notes": self.temporal_notes,
            "related_tasks": sorted(self.related_tasks),
            "cited_refs": sorted(self.cited_refs),
            "search_experience": list(self.search_experience),
            "claims": [c.to_dict() for c in self.claims],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ConceptNode":
        node_type = NodeType(d.get("node_type", "placeholder"))
        node = cls(
            id=d["id"],
            name=d.get("name", d["id"]),
            node_type=node_type,
            hop_distance=d.get("hop_distance"),
            discovery_dependency=set(d.get("discovery_dependency") or []),
            type_constraint=d.get("type_constraint", ""),
            condition_constraints=list(d.get("condition_constraints", [])),
            core_criteria=list(d.get("core_criteria", [])),
            supplementary_criteria=list(d.get("supplementary_criteria", [])),
            core_pending=list(d.get("core_pending", d.get("core_criteria", []))),
            supplementary_pending=list(
                d.get("supplementary_pending", d.get("supplementary_criteria", []))
            ),
            discovered_items=list(d.get("discovered_items", [])),
            item_findings=copy.deepcopy(d.get("item_findings", {})),
            cross_item_findings=copy.deepcopy(d.get("cross_item_findings", {})),
            quality_profile=QualityProfile.from_dict(d.get("quality_profile", {})),
            contradictions=[ContradictionRecord(**c) for c in d.get("contradictions", [])],
            unexpected_discoveries=list(d.get("unexpected_discoveries", [])),
            temporal_notes=d.get("temporal_notes", ""),
            related_tasks=set(d.get("related_tasks", [])),
            cited_refs=set(d.get("cited_refs", [])),
            search_experience=list(d.get("search_experience", [])),
            claims=[Claim.from_dict(c) for c in d.get("claims", [])],
        )
        node.refresh_state()
        return node


@dataclass
class SearchHistoryEntry:
    query: str
    summary: str
    feedback: str = ""


@dataclass
class RelationEdge:
    id: str
    source: str
    target: str
    inquiry_goal: str = ""
    core_criteria: list[str] = field(default_factory=list)
    supplementary_criteria: list[str] = field(default_factory=list)
    task_type: TaskType = TaskType.OPEN
    specified_source: str | None = None
    attempt_count: int = 0
    status: EdgeStatus = EdgeStatus.TO_SOLVE
    search_history: list[SearchHistoryEntry] = field(default_factory=list)
    relation: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "source": self.source,
            "target": self.target,
            "relation": self.relation,
            "inquiry_goal": self.inquiry_goal,
            "core_criteria": list(self.core_criteria),
            "supplementary_criteria": list(self.supplementary_criteria),
            "task_type": self.task_type.value,
            "specified_source": self.specified_source,
            "attempt_count": self.attempt_count,
            "status": self.status.value,
            "search_history": [dict(h.__dict__) for h in self.search_history],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RelationEdge":
        return cls(
            id=d["id"],
            source=d["source"],
            target=d["target"],
            relation=d.get("relation", d.get("type", "")),
            inquiry_goal=d.get("inquiry_goal", ""),
            core_criteria=list(d.get("core_criteria", [])),
            supplementary_criteria=list(d.get("supplementary_criteria", [])),
            task_type=TaskType(d.get("task_type", "open")),
            specified_source=d.get("specified_source"),
            attempt_count=int(d.get("attempt_count", 0)),
            status=EdgeStatus(d.get("status", d.get("state", "to_solve"))),
            search_history=[SearchHistoryEntry(**h) for h in d.get("search_history", [])],
        )


@dataclass
class CognitiveGraph:
    nodes: dict[str, ConceptNode] = field(default_factory=dict)
    edges: dict[str, RelationEdge] = field(default_factory=dict)
    user_protected: set[str] = field(default_factory=set)
    structure_type: StructureType = StructureType.MIXED
    query: str = ""
    _dyn_counter: int = 0

    @property
    def root_ids(self) -> set[str]:
        return {nid for nid, n in self.nodes.items() if n.is_start}

    def add_node(self, node: ConceptNode) -> ConceptNode:
        if node.id in self.nodes:
            raise GraphError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        return node

    def add_edge(self, edge: RelationEdge) -> RelationEdge:
        if edge.id in self.edges:
            raise GraphError(f"duplicate edge id {edge.id!r}")
        for end in (edge.source, edge.target):
            if end not in self.nodes:
                raise GraphError(f"edge {edge.id} references missing node {end!r}")
        if edge.source == edge.target:
            raise GraphError(f"self-loop on {edge.source!r}")
        if any(e.source == edge.source and e.target == edge.target for e in self.edges.values()):
            raise GraphError(f"duplicate edge {edge.source}->{edge.target}")
        if edge.source in self.descendants(edge.target):
            raise GraphError(f"edge {edge.source}->{edge.target} would create a cycle")
        self.edges[edge.id] = edge
        return edge

    def remove_node(self, node_id: str) -> list[str]:
        """Delete a node and every incident edge; returns removed edge ids."""
        self.nodes.pop(node_id)
        gone = [eid for eid, e in self.edges.items() if node_id in (e.source, e.target)]
        for eid in gone:
            del self.edges[eid]
        return gone

    def incoming(self, node_id: str) -> list[RelationEdge]:
        return [e for e in self.edges.values() if e.target == node_id]

    def outgoing(self, node_id: str) -> list[RelationEdge]:
        return [e for e in self.edges.values() if e.source == node_id]

    def upstream(self, node_id: str) -> list[ConceptNode]:
        return [self.nodes[e.source] for e in self.incoming(node_id)]

    def descendants(self, node_id: str) -> set[str]:
        """Nodes strictly reachable from ``node_id`` along directed edges."""
        seen: set[str] = set()
        frontier = [node_id]
        while frontier:
            cur = frontier.pop()
            for e in self.edges.values():
                if e.source == cur and e.target not in seen:
                    seen.add(e.target)
                    frontier.append(e.target)
        seen.discard(node_id)
        return seen

    def reachable(self) -> set[str]:
        return set(bfs_layers(self))

    def unreachable(self) -> set[str]:
        return set(self.nodes) - self.reachable()

    def next_dynamic_id(self, prefix: str) -> str:
        taken = set(self.nodes) | set(self.edges)
        while True:
            self._dyn_counter += 1
            cand = f"{prefix}_dyn_{self._dyn_counter}"
            if cand not in taken:
                return cand

    def copy(self) -> "CognitiveGraph":
        return copy.deepcopy(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": SCHEMA_VERSION,
            "query": self.query,
            "structure_type": self.structure_type.value,
            "user_protected": sorted(self.user_protected),
            "root_ids": sorted(self.root_ids),
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [e.to_dict() for e in self.edges.values()],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CognitiveGraph":
        version = d.get("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise GraphError(f"unsupported graph schema version {version}")
        g = cls(
            user_protected=set(d.get("user_protected", [])),
            structure_type=StructureType(d.get("structure_type", "mixed")),
            query=d.get("query", ""),
        )
        for nd in d.get("nodes", []):
            g.add_node(ConceptNode.from_dict(nd))
        for ed in d.get("edges", []):
            g.add_edge(RelationEdge.from_dict(ed))
        if not g.user_protected <= set(g.nodes):
            raise GraphError("user_protected references missing nodes")
        return g


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def compute_state(core_pending: Iterable[str], findings_nonempty: bool) -> CognitiveState:
    if not findings_nonempty:
        return CognitiveState.UNKNOWN
    return CognitiveState.PARTIAL if list(core_pending) else CognitiveState.KNOWN


def bfs_layers(graph: CognitiveGraph) -> dict[str, int]:
    """Shortest directed distance from the nearest root for every reachable node."""
    dist = {r: 0 for r in graph.root_ids}
    queue = deque(sorted(dist))
    adj: dict[str, list[str]] = {}
    for e in graph.edges.values():
        adj.setdefault(e.source, []).append(e.target)
    while queue:
        cur = queue.popleft()
        for nxt in adj.get(cur, []):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def recompute_hops(graph: CognitiveGraph) -> CognitiveGraph:
    """Set hop distances in place; unreachable nodes get ``None``."""
    dist = bfs_layers(graph)
    for nid, node in graph.nodes.items():
        node.hop_distance = dist.get(nid)
    return graph


def edge_transition(
    edge: RelationEdge, event: str, target_state: CognitiveState | None = None
) -> RelationEdge:
    if event == "dispatched":
        if edge.status not in (EdgeStatus.TO_SOLVE, EdgeStatus.INVESTIGATING):
            raise IllegalTransition(f"cannot dispatch on {edge.status.value} edge {edge.id}")
        if edge.attempt_count >= MAX_ATTEMPTS:
            raise IllegalTransition(f"edge {edge.id} already used {MAX_ATTEMPTS} attempts")
        edge.attempt_count += 1
        edge.status = EdgeStatus.INVESTIGATING
    elif event == "task_closed":
        if edge.status is EdgeStatus.TO_SOLVE:
            raise IllegalTransition(f"task closed on undispatched edge {edge.id}")
        if edge.status is not EdgeStatus.INVESTIGATING:
            # a late sibling task on an already-settled edge
            return edge
        if target_state is CognitiveState.KNOWN:
            edge.status = EdgeStatus.SOLVED
        elif edge.attempt_count >= MAX_ATTEMPTS:
            edge.status = EdgeStatus.EXHAUSTED
    else:
        raise IllegalTransition(f"unknown edge event {event!r}")
    return edge


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.1f}"


def compile_planner_view(graph: CognitiveGraph, *, flat: bool = False, recent: int = 3) -> str:
    """Render the graph as the Markdown planning context.

    Only abstracted findings are rendered; verbatim evidence never reaches the planner.
    ``flat`` hides edges, hops and dependencies (dimension-list mode).
    """
    lines = ["## Current Cognitive Graph State"]
    if not flat:
        lines.append(f"**Structure type**: {graph.structure_type.value}")
    lines.append("")
    lines.append("### Research Dimensions" if flat else "### Entity Nodes")
    for node in graph.nodes.values():
        label = node.cognitive_state.value.upper()
        loc = f"({node.id})" if flat else f"({node.id}, hop={node.hop_distance if node.hop_distance is not None else '?'})"
        lines.append(f"- [{label}] {node.name}  {loc}")
        if node.is_start:
            continue
        if node.type_constraint:
            lines.append(f"  - Type: {node.type_constraint}")
        if node.condition_constraints:
            lines.append(f"  - Conditions: {'; '.join(node.condition_constraints)}")
        if node.discovered_items:
            shown = node.discovered_items[:12]
            more = f", ... [{len(node.discovered_items)} total]" if len(node.discovered_items) > 12 else ""
            lines.append(f"  - Discovered: {', '.join(shown)}{more}")
        for item in list(node.item_findings)[:12]:
            attrs = node.item_findings[item]
            lines.append(f"    - {item}: " + "; ".join(f"{k}: {v}" for k, v in attrs.items()))
        if node.cross_item_findings:
            lines.append("  - Cross-item insights:")
            for label_, v in node.cross_item_findings.items():
                val = " > ".join(v) if isinstance(v, list) else v
                lines.append(f"    - {label_}: {val}")
        if node.core_pending:
            lines.append(f"  - Core pending: {', '.join(node.core_pending)}")
        if node.supplementary_pending:
            lines.append(f"  - Supplementary pending: {', '.join(node.supplementary_pending)}")
        if node.contradictions:
            lines.append(f"  - Contradictions ({len(node.contradictions)}):")
            for c in node.contradictions[-recent:]:
                lines.append(f"    - {c.criterion}: kept {c.kept} ({c.resolution})")
        if node.unexpected_discoveries:
            lines.append(f"  - Unexpected ({len(node.unexpected_discoveries)}):")
            for u in node.unexpected_discoveries[-recent:]:
                lines.append(f"    - {u}")
        qp = node.quality_profile
        if qp.page_window:
            lines.append(
                f"  - Quality: CR={_fmt(qp.mean_cr)} AAP={_fmt(qp.mean_aap)} | "
                f"finding={qp.finding_strength.value}, unexpected={qp.unexpected_strength.value}"
            )
        if qp.accessibility_barriers:
            lines.append(f"  - Barriers: {', '.join(b.value for b in qp.accessibility_barriers)}")
        if not flat and node.discovery_dependency:
            lines.append(f"  - Depends on: {', '.join(sorted(node.discovery_dependency))}")
        if node.temporal_notes:
            lines.append(f"  - Temporal: {node.temporal_notes}")
    if flat:
        return "\n".join(lines) + "\n"

    groups = [
        (EdgeStatus.SOLVED, "Resolved inquiry goals"),
        (EdgeStatus.INVESTIGATING, "Investigating inquiry goals"),
        (EdgeStatus.EXHAUSTED, "Exhausted inquiry goals"),
        (EdgeStatus.TO_SOLVE, "To-solve inquiry goals"),
    ]
    for status, title in groups:
        members = [e for e in graph.edges.values() if e.status is status]
        if not members:
            continue
        lines.append("")
        lines.append(f"### {title}")
        for e in members:
            rel = e.relation or "relates_to"
            lines.append(
                f"- {e.source} --{rel}--> {e.target}   ({e.id}, {e.attempt_count}/{MAX_ATTEMPTS})"
                + (f": {e.inquiry_goal}" if e.inquiry_goal else "")
            )
            if status is EdgeStatus.INVESTIGATING:
                for h in e.search_history[-recent:]:
                    lines.append(f"  - tried: {h.query} -> {h.summary}" + (f" | {h.feedback}" if h.feedback else ""))
    return "\n".join(lines) + "\n"
