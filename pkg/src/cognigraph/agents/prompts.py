"""Prompt templates shipped as text assets; rendering is plain placeholder substitution."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


@lru_cache(maxsize=None)
def template(name: str) -> str:
    text = resources.files("cognigraph.agents").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    lines = text.splitlines(keepends=True)
    if lines and lines[0].startswith("# version:"):
        lines = lines[1:]
    return "".join(lines)


def version(name: str) -> int:
    text = resources.files("cognigraph.agents").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    first = text.splitlines()[0] if text else ""
    return int(first.split(":", 1)[1]) if first.startswith("# version:") else 0


def placeholders(name: str) -> set[str]:
    return set(_PLACEHOLDER.findall(template(name)))


def render(name: str, **values) -> str:
    missing = placeholders(name) - set(values)
    if missing:
        raise KeyError(f"template {name!r} needs {sorted(missing)}")
    return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), template(name))
