"""Conservative read/skip triage of search hits."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from ..evidence import canonical_url
from .backend import BackendFailure, ChatBackend, Role, SchemaError, SearchHit, complete_json
from .prompts import render

log = logging.getLogger(__name__)


@dataclass
class PrefilterDecision:
    read: set[int] = field(default_factory=set)
    skip: set[int] = field(default_factory=set)
    reasoning: str = ""


def _validate(payload) -> dict:
    if not isinstance(payload, dict):
        raise SchemaError("prefilter output must be an object")
    [int(i) for i in payload.get("read", [])]
    [int(i) for i in payload.get("skip", [])]
    return payload


def prefilter(
    hits: list[SearchHit],
    criteria: list[str],
    backend: ChatBackend | None = None,
    key: str | None = None,
) -> PrefilterDecision:
    """Every hit lands in exactly one of read/skip; anything unclear is read."""
    seen: set[str] = set()
    dupes: set[int] = set()
    unique: list[SearchHit] = []
    for h in hits:
        u = canonical_url(h.url)
        if u in seen:
            dupes.add(h.index)
        else:
            seen.add(u)
            unique.append(h)
    skip_model: set[int] = set()
    read_model: set[int] = set()
    reasoning = ""
    if backend is not None and unique:
        listing = "\n".join(f"[{h.index}] {h.url}\n    {h.title}\n    {h.snippet}" for h in unique)
        prompt = render("prefilter", criteria=json.dumps(criteria, ensure_ascii=False), hits=listing)
        try:
            payload = complete_json(backend, Role.PREFILTER, prompt, _validate, schema="prefilter", key=key)
            skip_model = {int(i) for i in payload.get("skip", [])}
            read_model = {int(i) for i in payload.get("read", [])}
            reasoning = str(payload.get("reasoning", ""))
        except (SchemaError, BackendFailure) as exc:
            log.warning("prefilter failed open: %s", exc)
            reasoning = "prefilter unavailable; reading everything"
    all_idx = {h.index for h in hits}
    skip = dupes | {h.index for h in unique if h.index in skip_model and h.index not in read_model}
    return PrefilterDecision(read=all_idx - skip, skip=skip, reasoning=reasoning)
