"""Acceptance criteria 1-10, one test each.

Run directly (``python3 tests/test_acceptance.py``) or through pytest; either way
the terminal summary carries one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import itertools
import math
import random
import sys
import time

import pytest

from fuzzkit import random_engine_run
from test_assimilation import run_sequence
from test_deviation import GRID, PSI, oracle
from test_orchestrator import ablated_q53, check_guard_run
from test_restructuring import base, check_case, intent, stubborn
from test_writing import check_pipeline
from cognigraph.cli import replay_fixture
from cognigraph.deviation import DeviationSignal, PageRating, Strategy, page_composites, page_entry, select_strategy
from cognigraph.graph import WINDOW_CAPACITY, Barrier, CognitiveState, QualityProfile, citation_markers
from cognigraph.orchestrator import DEADLINE_MESSAGE
from cognigraph.restructuring import MAX_REPAIR_ROUNDS, RemoveNode, restructure
from cognigraph.trajectory import canonical_lines

criterion = pytest.mark.criterion


@criterion(1, "page composites (4,4,5,4,3) -> (4.00, 4.15)")
def test_c01_composites():
    t = time.perf_counter()
    cr, aap = page_composites(PageRating(4, 4, 5, 4, 3))
    elapsed = time.perf_counter() - t
    assert abs(cr - 4.00) <= 1e-9 and abs(aap - 4.15) <= 1e-9
    assert elapsed < 1e-3


@criterion(2, "router partitions the 0.1 grid and matches the oracle")
def test_c02_router_partition():
    t = time.perf_counter()
    seen = {}
    for cr, aap, phi, psi in itertools.product(GRID, GRID, (0, 1), (1, 2, 3, 4)):
        got = select_strategy(DeviationSignal(cr, aap, bool(phi), PSI[psi]))
        assert (cr, aap, phi, psi) not in seen
        seen[(cr, aap, phi, psi)] = got
        assert isinstance(got, Strategy) and got.value == oracle(cr, aap, phi, psi)
    assert len(seen) == 41 * 41 * 2 * 4
    assert seen[(3.9, 4.4, 0, 1)] is Strategy.EXPLOIT
    assert time.perf_counter() - t < 1.0


@criterion(3, "state table and 10^4 fuzzed assimilation sequences")
def test_c03_assimilation_fuzz():
    from fuzzkit import expected_state

    assert expected_state([], True) is CognitiveState.KNOWN
    assert expected_state(["x"], True) is CognitiveState.PARTIAL
    assert expected_state([], False) is CognitiveState.UNKNOWN
    assert expected_state(["x"], False) is CognitiveState.UNKNOWN
    for seed in range(10_000):
        run_sequence(random.Random(seed), 1 + seed % 8)


@criterion(4, "10^3 restructure intents keep I1, I2, reachability and snapshots")
def test_c04_restructure_fuzz():
    t = time.perf_counter()
    outcomes = [check_case(seed) for seed in range(1000)]
    assert time.perf_counter() - t < 30
    committed = sum(c for c, _ in outcomes)
    # both branches must be exercised for the check to mean anything
    assert 0 < committed < len(outcomes)


@criterion(5, "adversarial orphan rolls back after exactly 5 rounds")
def test_c05_orphan_rollback():
    g = base()
    g.nodes["a"].item_findings = {}
    g.nodes["a"].refresh_state()
    snap = g.to_dict()
    calls: list[int] = []
    out, rep = restructure(intent("prune", "a"), [RemoveNode("a")], g, proposer=stubborn(calls))
    assert calls == list(range(1, MAX_REPAIR_ROUNDS + 1)) and rep.rounds == 5
    assert rep.rolled_back and not rep.committed
    assert out.to_dict() == snap and g.to_dict() == snap


@criterion(6, "q53 replay reproduces the recorded trajectory")
def test_c06_q53_replay(q53_dir):
    t = time.perf_counter()
    r = replay_fixture(q53_dir)
    again = replay_fixture(q53_dir)
    assert time.perf_counter() - t < 10
    assert r.iterations == 9
    (ev,) = r.trajectory.of("restructure")
    rep = ev["report"]
    assert rep["op_type"] == "conc" and (rep["added"], rep["removed"], rep["violations"]) == (4, 2, 0)
    assert len(r.graph.nodes) == 6 and r.report.summary()["sections"] == 8
    assert any(e["message"] == "Removed invalid evidence refs {64}" for e in r.trajectory.of("writing"))
    section7 = dict((sec.section_id, text) for sec, text in r.report.sections)[7]
    assert 64 not in citation_markers(section7)
    assert canonical_lines(r.trajectory.events) == canonical_lines(again.trajectory.events)


@criterion(7, "guard, deadline and hard ceiling hold under fuzzed planners")
def test_c07_guard_fuzz():
    late_rejections = 0
    for seed in range(500):
        check_guard_run(seed)
        _, r = random_engine_run(seed)
        late_rejections += sum(1 for e in r.trajectory.of("add_task_rejected") if e["reason"] == DEADLINE_MESSAGE)
    assert late_rejections > 0


@criterion(8, "citation closure and the quote boundary over fuzzed pipelines")
def test_c08_citation_closure():
    for seed in range(500):
        check_pipeline(seed)


@criterion(9, "ablations A2 and A3, and no-flag runs match the baseline")
def test_c09_ablations(q53_dir):
    e2, r2 = ablated_q53(q53_dir, a2=True)
    hits = r2.trajectory.of("ablation_intercept")
    assert hits and {h["op_type"] for h in hits} <= {"conc", "pivot", "correct"}
    _, r3 = ablated_q53(q53_dir, a3=True)
    assert all(n.cognitive_state is not CognitiveState.KNOWN for n in r3.graph.nodes.values())
    e0, r0 = ablated_q53(q53_dir)
    baseline = replay_fixture(q53_dir)
    assert e0.ablation_hits == 0
    assert canonical_lines(r0.trajectory.events) == canonical_lines(baseline.trajectory.events)


@criterion(10, "55 pages: means over the last 50, gated pages excluded, phi set")
def test_c10_window():
    rng = random.Random(10)
    rows = [(*(rng.randint(1, 5) for _ in range(5)), i in (2, 52)) for i in range(55)]
    profile = QualityProfile()
    for c, r, a, b, p, gated in rows:
        profile.page_window.append(page_entry(PageRating(c, r, a, b, p, accessible=not gated, barrier=Barrier.PAYWALL if gated else None)))
    profile.accessibility_barriers = [e.barrier for e in profile.page_window if e.barrier]
    window = [x for x in rows[-WINDOW_CAPACITY:] if not x[5]]
    assert len(profile.page_window) == 50 and len(window) == 49
    assert abs(profile.mean_cr - math.fsum(0.3 * x[0] + 0.7 * x[1] for x in window) / 49) <= 1e-9
    assert abs(profile.mean_aap - math.fsum(0.4 * x[2] + 0.35 * x[3] + 0.25 * x[4] for x in window) / 49) <= 1e-9
    assert profile.phi
    assert DeviationSignal.from_profile(profile).phi


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
