"""Model-backed judger for coverage, redundancy, matching and contradiction resolution."""

from __future__ import annotations

import json
import logging

from ..assimilation import Finding, KeyJudger
from ..graph import Claim
from .backend import BackendFailure, ChatBackend, Role, SchemaError, complete_json
from .prompts import render

log = logging.getLogger(__name__)


def _validate(p) -> dict:
    if not isinstance(p, dict) or not isinstance(p.get("answer"), bool):
        raise SchemaError("judge output needs a boolean answer")
    return p


class ModelJudger:
    """Asks the graph-manager role; falls back to exact matching when the model fails."""

    def __init__(self, backend: ChatBackend):
        self.backend = backend
        self.fallback = KeyJudger()

    def _ask(self, question: str, payload) -> dict | None:
        prompt = render("judge", question=question, payload=json.dumps(payload, ensure_ascii=False, indent=1))
        try:
            return complete_json(self.backend, Role.GRAPH_MANAGER, prompt, _validate, schema="judge")
        except (SchemaError, BackendFailure) as exc:
            log.warning("judger fell back to key matching: %s", exc)
            return None

    def same(self, old, new) -> bool:
        if self.fallback.same(old, new):
            return True
        r = self._ask("Do the two claims state the same thing?", {"old": old, "new": new})
        return bool(r and r["answer"])

    def covers(self, criterion: str, claims: list[Claim]) -> bool:
        relevant = [c.text for c in claims if c.criterion == criterion]
        if not relevant:
            return False
        r = self._ask(
            f"Taken together, do these findings fully satisfy the criterion {criterion!r}? "
            "A confirmed negative result counts as satisfying it.",
            relevant,
        )
        return self.fallback.covers(criterion, claims) if r is None else r["answer"]

    def matches(self, finding: Finding, criteria: list[str]) -> bool:
        if self.fallback.matches(finding, criteria):
            return True
        if not criteria:
            return False
        r = self._ask(
            "Does this finding address one of the listed criteria?",
            {"finding": finding.answer, "tagged": finding.criterion, "criteria": criteria},
        )
        return bool(r and r["answer"])

    def resolve(self, criterion: str, old: str, new: str) -> tuple[str, str]:
        r = self._ask(f"Two claims on {criterion!r} conflict. Is the new one more reliable?", {"old": old, "new": new})
        if r is None or not r.get("rationale"):
            return self.fallback.resolve(criterion, old, new)
        return ("new" if r.get("kept", "new") == "new" else "old"), str(r["rationale"])
