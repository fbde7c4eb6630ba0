from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

Q53 = Path(str(resources.files("cognigraph") / "fixtures" / "q53"))

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion n")


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    n, text = mark
    prev = _criteria.get(n, (text, "PASS"))[1]
    failed = report.failed or (report.when == "call" and report.skipped)
    _criteria[n] = (text, "FAIL" if failed or prev == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {text}")


def quote(text: str, n: int = 240) -> str:
    base = f"{text}. " + "Supporting passage reproduced from the source page with its figures and dates. " * 8
    return base[:n]


def finding(criterion: str, answer: str, url: str, **extra) -> dict:
    return {"criterion": criterion, "answer": answer, "evidence_quote": quote(answer), "source_url": url, **extra}


def obs(task_id: str, target: str, edge: str, findings: list[dict], pages=None, **extra) -> dict:
    return {
        "task_id": task_id,
        "target_node": target,
        "edge_id": edge,
        "findings": findings,
        "page_scores": pages if pages is not None else [{"c": 4, "r": 4, "alpha": 4, "beta": 4, "rho": 4, "barrier": None}],
        "psi": extra.pop("psi", "none"),
        "finding_strength": extra.pop("finding_strength", "strong"),
        "queries": extra.pop("queries", ["q"]),
        "search_calls": extra.pop("search_calls", 1),
        **extra,
    }


def write_bundle(root: Path, graph: dict, turns: list[dict], observations: list[dict], realizations=None, writing=None) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "query.json").write_text(json.dumps({"query": graph.get("query", "test question"), "graph": graph}))
    (root / "planner.json").write_text(json.dumps({"turns": turns}))
    (root / "realizations.json").write_text(json.dumps(realizations or {}))
    if writing is not None:
        (root / "writing.json").write_text(json.dumps(writing))
    od = root / "observations"
    od.mkdir(exist_ok=True)
    for o in observations:
        (od / f"{o['task_id']}.json").write_text(json.dumps(o))
    return root


def simple_graph(extra_nodes=(), extra_edges=()) -> dict:
    return {
        "query": "What is A?",
        "structure_type": "serial",
        "nodes": [
            {"id": "s", "name": "question", "node_type": "start"},
            {"id": "n1", "name": "Topic A", "core_criteria": ["A"], "user_named": True},
            *extra_nodes,
        ],
        "edges": [{"id": "r1", "source": "s", "target": "n1"}, *extra_edges],
    }


def add_task(task_id: str, edge: str, target: str, core=("A",), **extra) -> dict:
    return {"type": "add_task", "task_id": task_id, "edge_id": edge, "target_node_id": target, "core_criteria": list(core), **extra}


@pytest.fixture
def q53_dir() -> Path:
    return Q53


@pytest.fixture
def one_task_bundle(tmp_path) -> Path:
    """A question that resolves with a single task: add_task, then finish."""
    findings = [finding("A", "A is one", "https://a.example/1"), finding("A", "A is also two", "https://a.example/2", attribute="second")]
    writing = {
        "outline": [{"section_id": 1, "title": "About A", "relevant_node_ids": ["n1"]}],
        "plans": {"1": [{"claim": "A has two facets", "evidence_ids": [1, 2]}]},
        "prose": {"1": "A has two facets [[1]][[2]]."},
    }
    return write_bundle(
        tmp_path / "one",
        simple_graph(),
        [{"actions": [add_task("t1", "r1", "n1")]}, {"actions": [{"type": "finish"}]}],
        [obs("t1", "n1", "r1", findings)],
        writing=writing,
    )
