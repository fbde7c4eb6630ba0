from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cognigraph.graph import (
    MAX_ATTEMPTS,
    CognitiveGraph,
    CognitiveState,
    ConceptNode,
    EdgeStatus,
    GraphError,
    IllegalTransition,
    NodeType,
    RelationEdge,
    bfs_layers,
    citation_markers,
    compile_planner_view,
    compute_state,
    edge_transition,
    recompute_hops,
    strip_markers,
)


def chain(n: int) -> CognitiveGraph:
    g = CognitiveGraph(query="q")
    g.add_node(ConceptNode("s", "start", NodeType.START))
    prev = "s"
    for i in range(1, n + 1):
        g.add_node(ConceptNode(f"n{i}", f"N{i}", core_criteria=["c"], core_pending=["c"]))
        g.add_edge(RelationEdge(f"r{i}", prev, f"n{i}"))
        prev = f"n{i}"
    return g


@pytest.mark.parametrize(
    "pending,nonempty,want",
    [((), False, "unknown"), (("x",), False, "unknown"), (("x",), True, "partial"), ((), True, "known")],
)
def test_state_rule(pending, nonempty, want):
    assert compute_state(pending, nonempty).value == want


def test_start_node_state_fixed():
    n = ConceptNode("s", "q", NodeType.START)
    assert n.cognitive_state is CognitiveState.START
    n.item_findings["x"] = {"a": "b"}
    assert n.refresh_state() is CognitiveState.START


def test_add_edge_rejects_cycles_and_duplicates():
    g = chain(2)
    with pytest.raises(GraphError):
        g.add_edge(RelationEdge("back", "n2", "n1"))
    with pytest.raises(GraphError):
        g.add_edge(RelationEdge("dup", "s", "n1"))
    with pytest.raises(GraphError):
        g.add_edge(RelationEdge("self", "n1", "n1"))
    with pytest.raises(GraphError):
        g.add_edge(RelationEdge("r1", "s", "n2"))
    with pytest.raises(GraphError):
        g.add_edge(RelationEdge("ghost", "s", "zzz"))


def test_hops_and_reachability():
    g = chain(3)
    g.add_node(ConceptNode("iso", "isolated"))
    recompute_hops(g)
    assert [g.nodes[f"n{i}"].hop_distance for i in (1, 2, 3)] == [1, 2, 3]
    assert g.nodes["iso"].hop_distance is None
    assert g.unreachable() == {"iso"}
    assert bfs_layers(g)["s"] == 0


def test_remove_node_drops_incident_edges():
    g = chain(3)
    assert sorted(g.remove_node("n2")) == ["r2", "r3"]
    assert g.unreachable() == {"n3"}


def test_graph_dict_round_trip():
    g = chain(2)
    n = g.nodes["n1"]
    n.item_findings = {"Fund": {"size": "1.6T"}}
    n.cross_item_findings = {"summary": ["one", "two"]}
    n.cited_refs = {3, 1}
    n.refresh_state()
    g.user_protected.add("n1")
    e = g.edges["r1"]
    edge_transition(e, "dispatched")
    back = CognitiveGraph.from_dict(g.to_dict())
    assert back.to_dict() == g.to_dict()
    assert back.edges["r1"].status is EdgeStatus.INVESTIGATING


def test_from_dict_rejects_unknown_version():
    d = chain(1).to_dict()
    d["version"] = 99
    with pytest.raises(GraphError):
        CognitiveGraph.from_dict(d)


def test_edge_lifecycle_exhausts_after_k_attempts():
    e = RelationEdge("r", "a", "b")
    with pytest.raises(IllegalTransition):
        edge_transition(e, "task_closed")
    for _ in range(MAX_ATTEMPTS):
        edge_transition(e, "dispatched")
        edge_transition(e, "task_closed", CognitiveState.PARTIAL)
    assert e.status is EdgeStatus.EXHAUSTED and e.attempt_count == MAX_ATTEMPTS
    with pytest.raises(IllegalTransition):
        edge_transition(e, "dispatched")


def test_edge_solved_on_known_target():
    e = RelationEdge("r", "a", "b")
    edge_transition(e, "dispatched")
    edge_transition(e, "task_closed", CognitiveState.KNOWN)
    assert e.status is EdgeStatus.SOLVED
    with pytest.raises(IllegalTransition):
        edge_transition(e, "dispatched")
    with pytest.raises(IllegalTransition):
        edge_transition(e, "bogus")


@settings(max_examples=200)
@given(st.lists(st.sampled_from(["dispatched", "known", "partial", "unknown"]), max_size=12))
def test_edge_attempts_never_exceed_k(events):
    e = RelationEdge("r", "a", "b")
    for ev in events:
        try:
            if ev == "dispatched":
                edge_transition(e, "dispatched")
            else:
                edge_transition(e, "task_closed", CognitiveState(ev))
        except IllegalTransition:
            pass
        assert e.attempt_count <= MAX_ATTEMPTS
        if e.status is EdgeStatus.EXHAUSTED:
            assert e.attempt_count == MAX_ATTEMPTS


def test_citation_markers_and_strip():
    text = "A [[1]] and B [[12]][[3]], not [[0]] nor [[x]]."
    assert citation_markers(text) == [1, 12, 3]
    assert "[[" not in strip_markers("A [[1]] B [[2]]").replace("[[0]]", "")


def test_planner_view_shows_state_and_hides_quotes():
    g = chain(1)
    n = g.nodes["n1"]
    n.item_findings = {"Fund": {"size": "about 1.6T"}}
    n.refresh_state()
    view = compile_planner_view(g)
    assert "n1" in view and "partial" in view.lower()
    assert "about 1.6T" in view or "1.6T" in view
    flat = compile_planner_view(g, flat=True)
    assert "Research Dimensions" in flat and "Structure type" not in flat
