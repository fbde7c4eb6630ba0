"""Backend interfaces for chat, search and page retrieval, plus HTTP implementations."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Protocol

from ..errors import CognigraphError

log = logging.getLogger(__name__)

SCHEMA_RETRIES = 2


class BackendFailure(CognigraphError):
    pass


class SchemaError(CognigraphError):
    pass


class Role(str, Enum):
    PLANNER = "planner"
    PARSER = "parser"
    GRAPH_MANAGER = "graph_manager"
    SEARCHER = "searcher"
    PREFILTER = "prefilter"
    READER = "reader"
    OUTLINE = "outline"
    SECTION_PLANNER = "section_planner"
    SECTION_WRITER = "section_writer"


class ChatBackend(Protocol):
    def complete(self, role: Role, prompt: str, *, schema: str | None = None, key: str | None = None) -> Any:
        """Return text, or a parsed JSON payload when ``schema`` is given.

        ``key`` identifies the call site (turn, task or section) for replay backends.
        """
        ...


@dataclass(frozen=True)
class SearchHit:
    index: int
    url: str
    title: str = ""
    snippet: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class SearchProvider(Protocol):
    def search(self, query: str) -> list[SearchHit]: ...


class PageProvider(Protocol):
    def fetch(self, url: str) -> str: ...


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(text: Any) -> Any:
    if not isinstance(text, str):
        return text
    m = _FENCE.search(text)
    body = m.group(1) if m else text
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"response is not JSON: {exc}") from None


def complete_json(
    backend: ChatBackend,
    role: Role,
    prompt: str,
    validate: Callable[[Any], Any],
    *,
    schema: str,
    key: str | None = None,
    retries: int = SCHEMA_RETRIES,
) -> Any:
    """Call the backend and validate the payload, retrying on schema failures."""
    last: Exception | None = None
    for attempt in range(retries + 1):
        payload = backend.complete(role, prompt, schema=schema, key=key)
        try:
            return validate(extract_json(payload))
        except (SchemaError, KeyError, TypeError, ValueError) as exc:
            last = exc
            log.warning("%s output failed %s schema (attempt %d): %s", role.value, schema, attempt + 1, exc)
    raise SchemaError(f"{role.value}: {last}")


class TokenBucket:
    """Shared rate limiter: ``rate`` tokens per second, bursts up to ``capacity``."""

    def __init__(self, rate: float, capacity: int = 1, clock: Callable[[], float] = time.monotonic):
        self.rate = rate
        self.capacity = capacity
        self.tokens = float(capacity)
        self.clock = clock
        self.stamp = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


class HttpChatBackend:
    """OpenAI-compatible chat-completions client with a model per role."""

    def __init__(
        self,
        base_url: str,
        models: dict[str, str],
        api_key_env: str = "COGNIGRAPH_API_KEY",
        timeout: float = 120.0,
        retries: int = 2,
        limiter: TokenBucket | None = None,
        client=None,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.models = models
        self.retries = retries
        self.limiter = limiter
        key = os.environ.get(api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self.client = client or httpx.Client(timeout=timeout, headers=headers)

    def _model(self, role: Role) -> str:
        return self.models.get(role.value) or self.models.get("default") or ""

    def complete(self, role: Role, prompt: str, *, schema: str | None = None, key: str | None = None) -> Any:
        body: dict[str, Any] = {"model": self._model(role), "messages": [{"role": "user", "content": prompt}]}
        if schema:
            body["response_format"] = {"type": "json_object"}
        for attempt in range(self.retries + 1):
            if self.limiter:
                self.limiter.acquire()
            try:
                resp = self.client.post(f"{self.base_url}/chat/completions", json=body)
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                return extract_json(text) if schema else text
            except SchemaError:
                raise
            except Exception as exc:  # transport, status, malformed envelope
                log.warning("%s call failed (attempt %d): %s", role.value, attempt + 1, exc)
                if attempt == self.retries:
                    raise BackendFailure(f"{role.value}: {exc}") from exc
                time.sleep(min(2**attempt, 8))
        raise BackendFailure(role.value)


class HttpSearchProvider:
    """POSTs ``{"query": ...}`` and expects ``{"results": [{"url", "title", "snippet"}]}``."""

    def __init__(self, endpoint: str, api_key_env: str = "COGNIGRAPH_SEARCH_KEY", client=None, timeout: float = 30.0):
        import httpx

        self.endpoint = endpoint
        key = os.environ.get(api_key_env, "")
        self.client = client or httpx.Client(timeout=timeout, headers={"Authorization": f"Bearer {key}"} if key else {})

    def search(self, query: str) -> list[SearchHit]:
        resp = self.client.post(self.endpoint, json={"query": query})
        resp.raise_for_status()
        rows = resp.json().get("results", [])
        return [SearchHit(i, r["url"], r.get("title", ""), r.get("snippet", "")) for i, r in enumerate(rows)]


class HttpPageProvider:
    """POSTs ``{"url": ...}`` to an extraction service and returns plain text."""

    def __init__(self, endpoint: str, client=None, timeout: float = 60.0):
        import httpx

        self.endpoint = endpoint
        self.client = client or httpx.Client(timeout=timeout)

    def fetch(self, url: str) -> str:
        resp = self.client.post(self.endpoint, json={"url": url})
        resp.raise_for_status()
        data = resp.json()
        return data.get("text", "") if isinstance(data, dict) else str(data)
