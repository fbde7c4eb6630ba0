"""Append-only evidence store giving every citation marker a verbatim, URL-anchored quote."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable
from urllib.parse import urlsplit, urlunsplit

from .errors import CognigraphError

log = logging.getLogger(__name__)

QUOTE_MIN = 200
QUOTE_MAX = 500


class MissingQuote(CognigraphError):
    pass


@dataclass(frozen=True)
class EvidenceRecord:
    m: int
    quote: str
    summary: str
    criterion: str
    source_url: str
    task_id: str

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "v": self.quote,
            "w": self.summary,
            "l": self.criterion,
            "src": self.source_url,
            "task": self.task_id,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvidenceRecord":
        return cls(d["m"], d["v"], d["w"], d["l"], d["src"], d["task"])


@dataclass(frozen=True)
class RawEvidence:
    """One reader finding before global numbering; ``local_ref`` is the searcher's [[k]]."""

    local_ref: int
    quote: str
    summary: str
    criterion: str
    source_url: str


def canonical_url(url: str) -> str:
    parts = urlsplit(url.strip())
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), parts.path, parts.query, ""))


def quote_ok(quote: str | None) -> bool:
    return bool(quote) and QUOTE_MIN <= len(quote) <= QUOTE_MAX  # type: ignore[arg-type]


class EvidenceStore:
    """Thread-safe append-only record set; ids start at 1 and are never reused.

    When ``path`` is given, each insert is mirrored to a JSON-lines file.
    """

    def __init__(self, path: Path | str | None = None):
        self._records: list[EvidenceRecord] = []
        self._by_key: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()
        self.path = Path(path) if path else None
        self.rejected: list[RawEvidence] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, m: int) -> bool:
        return 1 <= m <= len(self._records)

    def get(self, m: int) -> EvidenceRecord:
        if m not in self:
            raise KeyError(m)
        return self._records[m - 1]

    @property
    def ids(self) -> set[int]:
        return set(range(1, len(self._records) + 1))

    def records(self) -> list[EvidenceRecord]:
        with self._lock:
            return list(self._records)

    def insert_batch(self, raw: Iterable[RawEvidence], task_id: str) -> dict[int, int]:
        remap: dict[int, int] = {}
        with self._lock:
            for r in raw:
                if not quote_ok(r.quote):
                    log.warning("rejected evidence [[%d]] from %s: missing or malformed quote", r.local_ref, task_id)
                    self.rejected.append(r)
                    continue
                key = (canonical_url(r.source_url), r.criterion)
                if key in self._by_key:
                    remap[r.local_ref] = self._by_key[key]
                    continue
                rec = EvidenceRecord(len(self._records) + 1, r.quote, r.summary, r.criterion, r.source_url, task_id)
                self._records.append(rec)
                self._by_key[key] = rec.m
                remap[r.local_ref] = rec.m
                if self.path is not None:
                    with self.path.open("a", encoding="utf-8") as fh:
                        fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
        return remap

    def records_for_tasks(self, task_ids: Iterable[str]) -> list[EvidenceRecord]:
        wanted = set(task_ids)
        return [r for r in self.records() if r.task_id in wanted]

    def records_for_node(self, node) -> list[EvidenceRecord]:
        return self.records_for_tasks(node.related_tasks)

    def section_index(self, nodes: Iterable) -> list[tuple[int, str]]:
        """(id, criterion) pairs for the union of the nodes' records; no quote text."""
        tasks: set[str] = set()
        for n in nodes:
            tasks |= set(n.related_tasks)
        return [(r.m, r.criterion) for r in self.records_for_tasks(tasks)]

    def availability(self, graph) -> dict[str, int]:
        return {nid: len(self.records_for_node(n)) for nid, n in graph.nodes.items()}

    @classmethod
    def load(cls, path: Path | str) -> "EvidenceStore":
        store = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = EvidenceRecord.from_json(json.loads(line))
                if rec.m != len(store._records) + 1:
                    raise CognigraphError(f"non-contiguous evidence id {rec.m}")
                store._records.append(rec)
                store._by_key[(canonical_url(rec.source_url), rec.criterion)] = rec.m
        return store

    def dump_lines(self) -> str:
        return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in self.records())
