from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from cognigraph.audit import audit_events, audit_citations
from cognigraph.cli import replay_fixture
from cognigraph.graph import CognitiveState, citation_markers
from cognigraph.trajectory import canonical_lines

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def manifest(q53_dir):
    return json.loads((q53_dir / "manifest.json").read_text())


@pytest.fixture(scope="module")
def run(q53_dir):
    return replay_fixture(q53_dir)


@pytest.fixture(scope="module")
def q53_dir():
    from conftest import Q53

    return Q53


def test_shape_matches_manifest(run, manifest):
    assert run.iterations == manifest["planner_iterations"]
    assert len(run.graph.nodes) == manifest["final_nodes"]
    assert run.report.summary()["sections"] == manifest["sections"]
    assert sum(len(v) for v in run.report.insights.values()) == manifest["insights"]
    assert len({d["turn"] for d in run.trajectory.of("dispatch")}) == manifest["search_turns"]


def test_restructure_event(run, manifest):
    (ev,) = run.trajectory.of("restructure")
    r = ev["report"]
    want = manifest["restructure"]
    assert r["committed"] and r["op_type"] == want["op_type"]
    assert (r["added"], r["removed"], r["violations"]) == (want["added"], want["removed"], want["violations"])


def test_invalid_ref_is_stripped(run, manifest):
    bad = manifest["invalid_ref"]
    hits = [e for e in run.trajectory.of("writing") if e["message"] == f"Removed invalid evidence refs {{{bad['ref']}}}"]
    assert [h["section"] for h in hits] == [bad["section"]]
    sec_text = dict((s.section_id, t) for s, t in run.report.sections)[bad["section"]]
    assert bad["ref"] not in citation_markers(sec_text)


def test_evidence_ids_per_task(run, manifest):
    assert len(run.store) == manifest["evidence_records"]
    for c in run.trajectory.of("commit"):
        lo, hi = manifest["task_ranges"][c["task"]]
        assert c["evidence"] == list(range(lo, hi + 1))


def test_unique_reference_count(run, manifest, q53_dir):
    # count oracle: distinct (url, criterion) pairs over every observation file
    keys = set()
    for f in sorted((q53_dir / "observations").glob("*.json")):
        for fd in json.loads(f.read_text())["findings"]:
            keys.add((fd["source_url"].rstrip("/").lower(), fd["criterion"]))
    assert len(keys) == manifest["evidence_records"] == len(run.store)
    assert set(run.report.references) == set(citation_markers(run.report.markdown)) <= run.store.ids
    audit_citations(run.report.markdown, run.store.ids)


def test_final_graph_fully_resolved(run):
    assert all(n.cognitive_state is not CognitiveState.UNKNOWN for n in run.graph.nodes.values())
    assert run.graph.unreachable() == set()
    audit_events(run.trajectory.events)


def test_replay_is_deterministic(run, q53_dir):
    again = replay_fixture(q53_dir)
    assert canonical_lines(again.trajectory.events) == canonical_lines(run.trajectory.events)
    assert again.report.markdown == run.report.markdown


def test_fixture_is_fresh():
    proc = subprocess.run([sys.executable, str(ROOT / "tools" / "build_q53.py"), "--check"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
