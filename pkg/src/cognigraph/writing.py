"""Three-layer report writer: outline, per-section insight plans, per-section prose."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import CognigraphError
from .evidence import EvidenceStore
from .graph import CognitiveGraph, citation_markers, strip_markers

log = logging.getLogger(__name__)

MIN_SECTION_RECORDS = 2
MIN_BOUND = 2
MAX_BOUND = 5
TAIL_CAP = 15_000


class NoWritableContent(CognigraphError):
    pass


class InsufficientEvidence(CognigraphError):
    pass


class CitationClosureError(CognigraphError):
    pass


class Hint(str, Enum):
    TABLE = "table"
    LIST = "list"
    COMPARISON = "comparison"
    NARRATIVE = "narrative"


@dataclass
class OutlineSection:
    section_id: int
    title: str
    description: str = ""
    answers_aspect: str = ""
    relevant_node_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "OutlineSection":
        return cls(
            int(d["section_id"]),
            d["title"],
            d.get("description", ""),
            d.get("answers_aspect", ""),
            list(d.get("relevant_node_ids", [])),
        )


@dataclass
class Insight:
    claim: str
    evidence_ids: tuple[int, ...]
    presentation_hint: Hint | None = None

    def __post_init__(self):
        if not MIN_BOUND <= len(set(self.evidence_ids)) <= MAX_BOUND:
            raise InsufficientEvidence(f"insight binds {len(set(self.evidence_ids))} ids")

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "evidence_ids": list(self.evidence_ids),
            "hint": self.presentation_hint.value if self.presentation_hint else None,
        }


@dataclass
class WritingEvent:
    layer: str
    section_id: int | None
    message: str
    data: dict = field(default_factory=dict)


@dataclass
class Transcript:
    """Prompts sent to each writing layer, kept for information-boundary audits."""

    prompts: list[tuple[str, int | None, str]] = field(default_factory=list)
    events: list[WritingEvent] = field(default_factory=list)

    def note(self, layer: str, section_id, message: str, **data) -> None:
        log.info("[%s] %s", layer, message)
        self.events.append(WritingEvent(layer, section_id, message, data))


# ---------------------------------------------------------------------------
# citation filter
# ---------------------------------------------------------------------------


def _scan_marker(text: str, i: int) -> tuple[int, int] | None:
    """If a [[m]] marker starts at ``i`` return (m, end index), else None."""
    if not text.startswith("[[", i):
        return None
    j = i + 2
    if j >= len(text) or text[j] not in "123456789":
        return None
    k = j
    while k < len(text) and text[k].isdigit() and text[k].isascii():
        k += 1
    if not text.startswith("]]", k):
        return None
    return int(text[j:k]), k + 2


def filter_invalid_citations(text: str, bound_ids) -> tuple[str, list[int]]:
    bound = set(bound_ids)
    out: list[str] = []
    removed: list[int] = []
    i = 0
    n = len(text)
    while i < n:
        hit = _scan_marker(text, i)
        if hit is None:
            out.append(text[i])
            i += 1
            continue
        m, end = hit
        if m in bound:
            out.append(text[i:end])
        else:
            removed.append(m)
        i = end
    return "".join(out), removed


# ---------------------------------------------------------------------------
# layer 1
# ---------------------------------------------------------------------------


def availability_index(graph: CognitiveGraph, store: EvidenceStore) -> list[dict]:
    out = []
    for nid, node in graph.nodes.items():
        recs = store.records_for_node(node)
        out.append(
            {
                "node_id": nid,
                "name": node.name,
                "state": node.cognitive_state.value,
                "records": len(recs),
                "criteria": sorted({r.criterion for r in recs}),
            }
        )
    return out


def default_outline(graph: CognitiveGraph) -> list[dict]:
    sections = []
    for node in graph.nodes.values():
        if node.is_start or not node.has_findings:
            continue
        sections.append(
            {
                "section_id": len(sections) + 1,
                "title": node.name,
                "description": f"What the research established about {node.name}.",
                "answers_aspect": node.name,
                "relevant_node_ids": [node.id],
            }
        )
    return sections


def plan_outline(
    graph: CognitiveGraph,
    store: EvidenceStore,
    proposal: list[dict] | None = None,
    min_records: int = MIN_SECTION_RECORDS,
    transcript: Transcript | None = None,
) -> list[OutlineSection]:
    """Validate an outline proposal against the graph and the evidence available per section."""
    transcript = transcript or Transcript()
    if not any(n.has_findings for n in graph.nodes.values() if not n.is_start):
        raise NoWritableContent("graph holds no findings")
    proposal = proposal if proposal is not None else default_outline(graph)
    sections: list[OutlineSection] = []
    for raw in proposal:
        sec = OutlineSection.from_dict(raw)
        keep = []
        for nid in sec.relevant_node_ids:
            node = graph.nodes.get(nid)
            if node is None:
                transcript.note("OutlinePlanner", sec.section_id, f"dropped unknown node {nid}")
            elif node.is_start and not node.has_findings:
                continue
            else:
                keep.append(nid)
        sec.relevant_node_ids = keep
        count = len(store.section_index(graph.nodes[n] for n in keep))
        if not keep or count < min_records:
            transcript.note(
                "OutlinePlanner", sec.section_id, f"dropped section {sec.section_id}: {count} record(s)"
            )
            continue
        sections.append(sec)
    if not sections:
        raise NoWritableContent("no section has enough evidence")
    return sections


# ---------------------------------------------------------------------------
# layer 2
# ---------------------------------------------------------------------------


def _claim_key(claim: str) -> str:
    return " ".join(strip_markers(claim).split()).casefold()


def section_findings(graph: CognitiveGraph, node_ids) -> list[str]:
    lines = []
    for nid in node_ids:
        node = graph.nodes[nid]
        for item, attrs in node.item_findings.items():
            for k, v in attrs.items():
                lines.append(f"{node.name} / {item} / {k}: {v}")
        for k, v in node.cross_item_findings.items():
            val = " > ".join(v) if isinstance(v, list) else v
            lines.append(f"{node.name} / {k}: {val}")
    return lines


def bind_insights(
    section: OutlineSection,
    raw_insights: list[dict],
    index_ids: set[int],
    prior_claims: set[str],
    transcript: Transcript,
) -> list[Insight]:
    """Keep only in-section ids, enforce the 2..5 binding and drop repeated claims."""
    out: list[Insight] = []
    invalid: list[int] = []
    for raw in raw_insights:
        ids = [int(i) for i in raw.get("evidence_ids", [])]
        bad = [i for i in ids if i not in index_ids]
        invalid.extend(bad)
        good = list(dict.fromkeys(i for i in ids if i in index_ids))[:MAX_BOUND]
        key = _claim_key(raw.get("claim", ""))
        if not key:
            continue
        if key in prior_claims:
            transcript.note("SectionPlanner", section.section_id, f"skipped repeated claim: {raw['claim'][:60]}")
            continue
        if len(good) < MIN_BOUND:
            transcript.note("SectionPlanner", section.section_id, f"dropped thinly bound claim: {raw['claim'][:60]}")
            continue
        hint = raw.get("hint") or raw.get("presentation_hint")
        out.append(Insight(raw["claim"], tuple(good), Hint(hint) if hint else None))
        prior_claims.add(key)
    if invalid:
        refs = "{" + ", ".join(str(i) for i in sorted(set(invalid))) + "}"
        transcript.note("SectionPlanner", section.section_id, f"Removed invalid evidence refs {refs}", refs=sorted(set(invalid)))
    if not out:
        raise InsufficientEvidence(f"section {section.section_id} has no bindable insight")
    return out


# ---------------------------------------------------------------------------
# layer 3
# ---------------------------------------------------------------------------


def previous_tail(text: str, cap: int = TAIL_CAP) -> str:
    clean = strip_markers(text)
    return clean[-cap:] if cap > 0 else ""


def bound_quotes(insights: list[Insight], store: EvidenceStore) -> list[dict]:
    ids = sorted({i for ins in insights for i in ins.evidence_ids})
    return [{"m": i, "quote": store.get(i).quote, "source": store.get(i).source_url} for i in ids]


def finalize_prose(section: OutlineSection, prose: str, insights: list[Insight], transcript: Transcript) -> str:
    bound = {i for ins in insights for i in ins.evidence_ids}
    clean, removed = filter_invalid_citations(prose, bound)
    if removed:
        transcript.note("SectionWriter", section.section_id, f"Removed unbound citations {sorted(set(removed))}", refs=removed)
    return clean


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass
class Report:
    title: str
    sections: list[tuple[OutlineSection, str]]
    references: dict[int, str]
    insights: dict[int, list[Insight]] = field(default_factory=dict)

    @property
    def markdown(self) -> str:
        parts = [f"# {self.title}", ""]
        for sec, prose in self.sections:
            parts += [f"## {sec.section_id}. {sec.title}", "", prose.strip(), ""]
        parts += ["## References", ""]
        parts += [f"[{m}] {url}" for m, url in sorted(self.references.items())]
        return "\n".join(parts).rstrip() + "\n"

    @property
    def insight_count(self) -> int:
        return sum(len(v) for v in self.insights.values())

    def summary(self) -> dict[str, Any]:
        return {
            "sections": len(self.sections),
            "insights": self.insight_count,
            "references": len(self.references),
            "chars": len(self.markdown),
        }


def assemble_report(
    title: str,
    sections: list[tuple[OutlineSection, str]],
    store: EvidenceStore,
    insights: dict[int, list[Insight]] | None = None,
) -> Report:
    cited: set[int] = set()
    for _, prose in sections:
        cited |= set(citation_markers(prose))
    missing = sorted(m for m in cited if m not in store)
    if missing:
        raise CitationClosureError(f"markers without stored evidence: {missing}")
    if not cited:
        log.warning("report carries no citations")
    refs = {m: store.get(m).source_url for m in sorted(cited)}
    return Report(title, sections, refs, insights or {})


def dumps(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=1)
