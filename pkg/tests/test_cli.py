from __future__ import annotations

import json
import shutil

import pytest

from conftest import add_task, simple_graph, write_bundle
from cognigraph import restructuring
from cognigraph.cli import main


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_replay_q53_exits_zero(q53_dir, tmp_path, capsys):
    code, out, _ = run_cli(capsys, "replay", q53_dir, "--out", tmp_path)
    assert code == 0
    assert "iterations=9 nodes=6 evidence=78 sections=8" in out
    for name in ("trajectory.jsonl", "graph.json", "evidence.jsonl", "report.md", "config.yaml"):
        assert (tmp_path / name).exists()


def test_run_with_fixture_is_replay(q53_dir, tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--fixture", q53_dir, "--out", tmp_path)
    assert code == 0 and "iterations=9" in out


def test_run_without_query_or_fixture(capsys):
    code, _, err = run_cli(capsys, "run")
    assert code == 2 and "--query" in err


def test_inspect_q53(q53_dir, tmp_path, capsys):
    run_cli(capsys, "replay", q53_dir, "--out", tmp_path)
    code, out, _ = run_cli(capsys, "inspect", tmp_path / "trajectory.jsonl")
    assert code == 0
    restructures = [l for l in out.splitlines() if ": restructure " in l]
    assert len(restructures) == 1 and "added=4, removed=2" in restructures[0]
    assert "Removed invalid evidence refs {64}" in out
    code, out, _ = run_cli(capsys, "inspect", tmp_path / "trajectory.jsonl", "--filter", "restructure")
    assert out.strip().splitlines() == restructures


def test_inspect_empty_log(tmp_path, capsys):
    (tmp_path / "empty.jsonl").write_text("")
    code, out, _ = run_cli(capsys, "inspect", tmp_path / "empty.jsonl")
    assert code == 0 and out == ""


def test_inspect_diff(q53_dir, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(capsys, "replay", q53_dir, "--out", a)
    run_cli(capsys, "replay", q53_dir, "--out", b, "--a2")
    code, out, _ = run_cli(capsys, "inspect", a / "trajectory.jsonl", "--diff", a / "trajectory.jsonl")
    assert code == 0 and out == ""
    # a2 cannot finish the script, so diff against a truncated copy instead
    lines = (a / "trajectory.jsonl").read_text().splitlines()
    (tmp_path / "cut.jsonl").write_text("\n".join(l for l in lines if json.loads(l)["turn"] <= 4) + "\n")
    code, out, _ = run_cli(capsys, "inspect", a / "trajectory.jsonl", "--diff", tmp_path / "cut.jsonl")
    assert code == 0
    removed = [l for l in out.splitlines() if l.startswith("-turn")]
    assert removed and all(int(l.split()[1].rstrip(":")) > 4 for l in removed)


def test_inspect_rejects_tampered_log(q53_dir, tmp_path, capsys):
    run_cli(capsys, "replay", q53_dir, "--out", tmp_path)
    lines = (tmp_path / "trajectory.jsonl").read_text().splitlines()
    del lines[3]
    (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
    code, _, err = run_cli(capsys, "inspect", tmp_path / "bad.jsonl")
    assert code == 2 and "malformed" in err


def test_validate_fixture(q53_dir, tmp_path, capsys):
    code, out, _ = run_cli(capsys, "validate-fixture", q53_dir)
    assert code == 0 and "fixture ok" in out
    broken = tmp_path / "broken"
    shutil.copytree(q53_dir, broken)
    first = sorted((broken / "observations").iterdir())[0]
    first.unlink()
    code, out, _ = run_cli(capsys, "validate-fixture", broken)
    assert code == 1 and first.stem in out
    code, _, err = run_cli(capsys, "replay", broken, "--out", tmp_path / "o")
    assert code == 2 and first.stem in err


def test_protected_prune_is_refused_not_fatal(tmp_path, capsys):
    turns = [
        {"actions": [{"type": "propose_restructure", "op_type": "prune", "focus": "n1", "rationale": "not needed"}]},
        {"actions": [add_task("t1", "r1", "n1")]},
        {"actions": [{"type": "finish"}]},
    ]
    from conftest import finding, obs

    fs = [finding("A", "A one", "https://a/1"), finding("A", "A two", "https://a/2", attribute="b")]
    root = write_bundle(tmp_path / "fx", simple_graph(), turns, [obs("t1", "n1", "r1", fs)],
                        realizations={"turn-1": [{"op": "remove_node", "id": "n1"}]},
                        writing={"outline": [{"section_id": 1, "title": "A", "relevant_node_ids": ["n1"]}],
                                 "plans": {"1": [{"claim": "c", "evidence_ids": [1, 2]}]},
                                 "prose": {"1": "A [[1]] [[2]]"}})
    out_dir = tmp_path / "out"
    code, _, _ = run_cli(capsys, "replay", root, "--out", out_dir)
    assert code == 0
    events = [json.loads(l) for l in (out_dir / "trajectory.jsonl").read_text().splitlines()]
    (r,) = [e["report"] for e in events if e["event"] == "restructure"]
    assert not r["committed"] and r["reason"] == "protected_node_deletion"


def test_i1_corruption_fails_audit(q53_dir, tmp_path, capsys, monkeypatch):
    orig = restructuring.apply_phase1

    def corrupting(edits, graph):
        out = orig(edits, graph)
        for n in out.nodes.values():
            if n.item_findings or n.cross_item_findings:
                n.item_findings, n.cross_item_findings = {}, {}
                n.refresh_state()
                break
        return out

    monkeypatch.setattr(restructuring, "apply_phase1", corrupting)
    monkeypatch.setattr(restructuring, "invariant_violations", lambda *a, **k: [])
    code, _, err = run_cli(capsys, "replay", q53_dir, "--out", tmp_path)
    assert code == 3
    assert "audit failed [I1]" in err


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit):
        main([])
