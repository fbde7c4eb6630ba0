"""Newline-delimited JSON trajectory log."""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any

from .errors import CognigraphError


class MalformedLog(CognigraphError):
    pass


class Trajectory:
    def __init__(self, path: Path | str | None = None, wallclock=time.time):
        self.events: list[dict[str, Any]] = []
        self.path = Path(path) if path else None
        self.wallclock = wallclock
        self.turn = 0
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def emit(self, event: str, **data: Any) -> dict[str, Any]:
        rec = {"seq": len(self.events) + 1, "turn": self.turn, "event": event, **data, "ts": round(self.wallclock(), 3)}
        self.events.append(rec)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        return rec

    def of(self, event: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["event"] == event]

    def canonical(self) -> str:
        return canonical_lines(self.events)


def canonical_lines(events: list[dict[str, Any]]) -> str:
    """Serialized events without timestamps, for determinism comparisons."""
    return "".join(
        json.dumps({k: v for k, v in e.items() if k != "ts"}, ensure_ascii=False, sort_keys=True) + "\n" for e in events
    )


def load_events(path: Path | str) -> list[dict[str, Any]]:
    events = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLog(f"line {i}: {exc}") from None
        if not isinstance(rec, dict) or "event" not in rec:
            raise MalformedLog(f"line {i}: missing event field")
        if rec.get("seq", len(events) + 1) != len(events) + 1:
            raise MalformedLog(f"line {i}: seq {rec.get('seq')} breaks the sequence, expected {len(events) + 1}")
        events.append(rec)
    return events
