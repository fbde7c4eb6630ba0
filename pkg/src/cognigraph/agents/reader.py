"""Page reader: criterion-tagged findings with enforced verbatim quotes."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from ..deviation import PageRating
from ..evidence import QUOTE_MAX, QUOTE_MIN
from ..graph import Barrier
from .backend import ChatBackend, Role, SchemaError, complete_json
from .prompts import render

log = logging.getLogger(__name__)


@dataclass
class ReaderFinding:
    answer: str
    quote: str
    item: str | None = None


@dataclass
class ReaderOutput:
    url: str
    findings: dict[str, ReaderFinding] = field(default_factory=dict)
    gaps: list[str] = field(default_factory=list)
    unexpected_insights: list[tuple[str, str, str]] = field(default_factory=list)
    quality_scores: PageRating | None = None
    temporal_context: str = ""
    accessibility_notes: list[tuple[str, Barrier, str, str]] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def quote_in_page(quote: str, page: str) -> bool:
    q = normalize_ws(quote)
    return bool(q) and q in normalize_ws(page)


def _clamp(v) -> int:
    return max(1, min(5, int(v)))


def validate_reader_payload(payload) -> dict:
    if not isinstance(payload, dict):
        raise SchemaError("reader output must be an object")
    if "part_a" in payload or "part_b" in payload:
        raise SchemaError("reader output must be flat")
    if not isinstance(payload.get("findings", {}), dict):
        raise SchemaError("findings must map criterion to answer")
    for note in payload.get("accessibility_notes", []) or []:
        Barrier(note["barrier"])
    qs = payload.get("quality_scores") or {}
    for k in ("c", "r", "alpha", "beta", "rho"):
        int(qs.get(k, 1))
    return payload


def build_output(payload: dict, page: str, url: str, criteria: list[str]) -> ReaderOutput:
    out = ReaderOutput(url=url)
    for crit, f in (payload.get("findings") or {}).items():
        if not isinstance(f, dict):
            out.dropped.append(crit)
            continue
        answer = str(f.get("answer", "")).strip()
        quote = str(f.get("quote", ""))
        if crit not in criteria:
            log.info("reader finding on unknown criterion %r dropped", crit)
            out.dropped.append(crit)
        elif not answer:
            out.dropped.append(crit)
        elif not (QUOTE_MIN <= len(quote) <= QUOTE_MAX) or not quote_in_page(quote, page):
            log.info("quote check failed for %r on %s", crit, url)
            out.dropped.append(crit)
        else:
            out.findings[crit] = ReaderFinding(answer, quote, f.get("item"))
    out.gaps = [c for c in criteria if c not in out.findings]
    out.unexpected_insights = [
        (u.get("label", ""), u.get("insight", ""), u.get("evidence", ""))
        for u in payload.get("unexpected_insights", []) or []
        if u.get("insight")
    ]
    out.temporal_context = str(payload.get("temporal_context") or "")
    out.accessibility_notes = [
        (n.get("criterion", ""), Barrier(n["barrier"]), n.get("detail", ""), n.get("alternative_hint", ""))
        for n in payload.get("accessibility_notes", []) or []
    ]
    qs = payload.get("quality_scores") or {}
    scores = tuple(_clamp(qs.get(k, 1)) for k in ("c", "r", "alpha", "beta", "rho"))
    if out.accessibility_notes and not out.findings:
        # gated page: it only points at content, so relevance is capped and it carries no composites
        scores = (scores[0], min(scores[1], 2), *scores[2:])
        out.quality_scores = PageRating(*scores, accessible=False, barrier=out.accessibility_notes[0][1])
    else:
        out.quality_scores = PageRating(*scores)
    return out


def read_page(
    page: str,
    criteria: list[str],
    backend: ChatBackend,
    url: str = "",
    key: str | None = None,
) -> ReaderOutput | None:
    """Read one page; returns None when the backend never yields a valid payload."""
    prompt = render("reader", criteria=json.dumps(criteria, ensure_ascii=False), url=url, page=page)
    try:
        payload = complete_json(backend, Role.READER, prompt, validate_reader_payload, schema="reader", key=key or url)
    except SchemaError as exc:
        log.warning("reader gave up on %s: %s", url, exc)
        return None
    return build_output(payload, page, url, criteria)
