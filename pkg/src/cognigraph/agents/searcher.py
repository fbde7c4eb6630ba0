"""Search task execution: queries, prefilter, parallel readers, synthesis."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product

from ..actions import SearchTask
from ..assimilation import Finding, Observation, bind_evidence
from ..evidence import EvidenceStore, canonical_url
from ..graph import Strength, TaskType
from .backend import BackendFailure, ChatBackend, PageProvider, Role, SchemaError, SearchHit, SearchProvider, complete_json
from .prefilter import prefilter
from .prompts import render
from .reader import ReaderOutput, read_page

log = logging.getLogger(__name__)

MAX_QUERIES = 5


def specified_source_queries(source: str, topics: list[str], cap: int = MAX_QUERIES) -> list[str]:
    """Cross source expressions with topic keywords, capped at ``cap`` queries."""
    expressions = [f'"{source}"', source]
    return [f"{s} {t}" for s, t in product(expressions, topics or [""])][:cap]


def describe_task(task: SearchTask) -> str:
    lines = [f"Task: {task.node_name or task.task_id}"]
    if task.node_content:
        lines.append(task.node_content.strip())
    lines.append(f"Core criteria: {json.dumps(task.core_criteria, ensure_ascii=False)}")
    if task.supplementary_criteria:
        lines.append(f"Supplementary criteria: {json.dumps(task.supplementary_criteria, ensure_ascii=False)}")
    if task.task_type is TaskType.SPECIFIED and task.specified_source:
        lines.append(f"Use this source: {task.specified_source}")
    return "\n".join(lines)


def _queries(task: SearchTask, chat: ChatBackend, local_context: str) -> list[str]:
    topics = task.core_criteria + task.supplementary_criteria
    if task.task_type is TaskType.SPECIFIED and task.specified_source:
        return specified_source_queries(task.specified_source, topics)

    def validate(p):
        qs = [str(q) for q in p["queries"] if str(q).strip()]
        if not qs:
            raise SchemaError("no queries")
        return qs[:MAX_QUERIES]

    prompt = render("searcher", task=describe_task(task), local_context=local_context or "(none)")
    try:
        return complete_json(chat, Role.SEARCHER, prompt, validate, schema="queries", key=f"{task.task_id}:queries")
    except (SchemaError, BackendFailure) as exc:
        log.warning("query planning failed for %s: %s", task.task_id, exc)
        return [task.node_content.strip() or " ".join(topics)][:1]


def multi_search(queries: list[str], search: SearchProvider, experience: list[str]) -> list[SearchHit]:
    merged: list[SearchHit] = []
    seen: set[str] = set()
    for q in queries:
        try:
            hits = search.search(q)
        except Exception as exc:
            experience.append(f"search failed for {q!r}: {exc}")
            continue
        for h in hits:
            u = canonical_url(h.url)
            if u not in seen:
                seen.add(u)
                merged.append(SearchHit(len(merged), h.url, h.title, h.snippet))
    return merged


def execute_search_task(
    task: SearchTask,
    chat: ChatBackend,
    search: SearchProvider,
    pages: PageProvider,
    *,
    local_context: str = "",
    page_limit: int | None = None,
    max_workers: int = 4,
    store: EvidenceStore | None = None,
) -> Observation:
    criteria = task.core_criteria + task.supplementary_criteria
    experience: list[str] = []
    queries = _queries(task, chat, local_context)
    hits = multi_search(queries, search, experience)
    decision = prefilter(hits, criteria, chat, key=f"{task.task_id}:prefilter")
    selected = [h for h in hits if h.index in decision.read]
    if page_limit is not None:
        selected = selected[:page_limit]

    def read_one(hit: SearchHit) -> ReaderOutput | None:
        try:
            text = pages.fetch(hit.url)
        except Exception as exc:
            experience.append(f"could not retrieve {hit.url}: {exc}")
            return None
        out = read_page(text, criteria, chat, hit.url, key=f"{task.task_id}:{hit.url}")
        if out is None:
            experience.append(f"reader produced no usable output for {hit.url}")
        return out

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        outputs = [o for o in pool.map(read_one, selected) if o is not None]

    findings: list[Finding] = []
    obs = Observation(task.task_id, task.target_node_id, task.edge_id, queries=queries, search_calls=len(queries))
    for out in outputs:
        for crit, f in out.findings.items():
            findings.append(Finding(crit, f.answer, f.quote, out.url, attributed_item=f.item))
        if out.quality_scores is not None:
            obs.page_scores.append(out.quality_scores)
        obs.accessibility_notes += [(c, b, d) for c, b, d, _ in out.accessibility_notes]
        obs.unexpected_insights += out.unexpected_insights
        if out.temporal_context:
            obs.temporal_context.append(out.temporal_context)
        for crit in out.dropped:
            experience.append(f"{out.url}: finding on {crit!r} dropped for lack of a verbatim quote")
    if not outputs:
        experience.append("no usable pages for this task")
    obs.findings = findings
    obs.search_experience = experience

    if findings:
        listing = "\n".join(f"[[{i}]] ({f.criterion}) {f.answer}" for i, f in enumerate(findings, 1))
        prompt = render("synthesis", task=describe_task(task), findings=listing)
        try:
            syn = complete_json(chat, Role.SEARCHER, prompt, dict, schema="synthesis", key=f"{task.task_id}:synthesis")
            obs.synthesis = str(syn.get("summary", ""))
            obs.psi = Strength(syn.get("psi", "none"))
            obs.finding_strength = Strength(syn.get("finding_strength", "none"))
        except (SchemaError, BackendFailure, ValueError) as exc:
            log.warning("synthesis failed for %s: %s", task.task_id, exc)
    if store is not None:
        obs = bind_evidence(obs, store)
    return obs
