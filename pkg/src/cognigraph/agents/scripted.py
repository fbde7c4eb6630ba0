"""Deterministic fixture-driven backend for offline replay and tests."""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any

from ..errors import CognigraphError
from .backend import Role, SearchHit


class FixtureMiss(CognigraphError):
    pass


class ScriptedBackend:
    """Answers every role call from a response table keyed by (role, key).

    Calls are recorded in ``transcript`` as (role, key, prompt) for boundary audits.
    """

    def __init__(self, responses: dict[str, dict[str, Any]] | None = None):
        self.responses = responses or {}
        self.transcript: list[tuple[str, str | None, str]] = []
        self._lock = threading.Lock()

    def complete(self, role: Role, prompt: str, *, schema: str | None = None, key: str | None = None) -> Any:
        with self._lock:
            self.transcript.append((role.value, key, prompt))
        table = self.responses.get(role.value, {})
        if key is None or str(key) not in table:
            raise FixtureMiss(f"no scripted {role.value} response for key {key!r}")
        return json.loads(json.dumps(table[str(key)]))

    def prompts_for(self, role: Role) -> list[str]:
        return [p for r, _, p in self.transcript if r == role.value]


class ScriptedSearch:
    def __init__(self, hits: dict[str, list[dict]] | None = None):
        self.hits = hits or {}
        self.calls: list[str] = []

    def search(self, query: str) -> list[SearchHit]:
        self.calls.append(query)
        if query not in self.hits:
            raise FixtureMiss(f"no scripted hits for query {query!r}")
        return [SearchHit(i, h["url"], h.get("title", ""), h.get("snippet", "")) for i, h in enumerate(self.hits[query])]


class ScriptedPages:
    def __init__(self, pages: dict[str, str] | None = None):
        self.pages = pages or {}

    def fetch(self, url: str) -> str:
        if url not in self.pages:
            raise FixtureMiss(f"no scripted page for {url!r}")
        return self.pages[url]


def _read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


class FixtureBundle:
    """A replay directory: query.json, planner.json, realizations.json, writing.json,
    observations/<task_id>.json and an optional manifest.json of expected outcomes."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.query = _read_json(self.root / "query.json")
        self.planner = _read_json(self.root / "planner.json")
        real = self.root / "realizations.json"
        self.realizations = _read_json(real) if real.exists() else {}
        wr = self.root / "writing.json"
        self.writing = _read_json(wr) if wr.exists() else {}
        man = self.root / "manifest.json"
        self.manifest = _read_json(man) if man.exists() else {}
        self.observations: dict[str, dict] = {}
        obs_dir = self.root / "observations"
        if obs_dir.is_dir():
            for p in sorted(obs_dir.glob("*.json")):
                d = _read_json(p)
                self.observations[d["task_id"]] = d

    def backend(self) -> ScriptedBackend:
        responses: dict[str, dict[str, Any]] = {
            Role.PARSER.value: {"query": self.query["graph"]},
            Role.PLANNER.value: {str(i): t for i, t in enumerate(self.planner["turns"], 1)},
            Role.GRAPH_MANAGER.value: dict(self.realizations),
        }
        if self.writing:
            responses[Role.OUTLINE.value] = {"outline": {"sections": self.writing["outline"]}}
            responses[Role.SECTION_PLANNER.value] = {
                str(k): {"insights": v} for k, v in self.writing.get("plans", {}).items()
            }
            responses[Role.SECTION_WRITER.value] = {str(k): v for k, v in self.writing.get("prose", {}).items()}
        return ScriptedBackend(responses)

    def observation(self, task_id: str) -> dict:
        if task_id not in self.observations:
            raise FixtureMiss(f"no scripted observation for task {task_id!r}")
        return json.loads(json.dumps(self.observations[task_id]))

    def validate(self) -> list[str]:
        """Structural checks on the bundle; returns a list of problems."""
        from ..graph import CognitiveGraph

        problems: list[str] = []
        try:
            CognitiveGraph.from_dict(self.query["graph"])
        except Exception as exc:
            problems.append(f"graph: {exc}")
        task_ids: list[str] = []
        for i, turn in enumerate(self.planner.get("turns", []), 1):
            for a in turn.get("actions", []):
                if a.get("type") == "add_task":
                    task_ids.append(a["task_id"])
                elif a.get("type") == "propose_restructure":
                    key = a.get("realization", f"turn-{i}")
                    if key not in self.realizations:
                        problems.append(f"turn {i}: realization {key!r} missing")
        for t in task_ids:
            if t not in self.observations:
                problems.append(f"task {t}: observation missing")
        for t in self.observations:
            if t not in task_ids:
                problems.append(f"observation {t}: never dispatched")
        if self.writing:
            ids = {str(s["section_id"]) for s in self.writing.get("outline", [])}
            for kind in ("plans", "prose"):
                for sid in ids - set(map(str, self.writing.get(kind, {}))):
                    problems.append(f"section {sid}: {kind} missing")
        return problems
