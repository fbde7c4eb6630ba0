from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cognigraph.config import RESTRICTED_OPS, Ablation, EngineWiring, RunConfig, apply_ablation
from cognigraph.graph import Strength


def test_defaults():
    c = RunConfig()
    assert (c.soft_deadline_minutes, c.max_turn, c.worker_cap, c.cross_route_cap, c.tail_cap) == (70.0, 20, 4, 2, 15000)
    assert (c.thresholds.tau_h, c.thresholds.tau_l, c.thresholds.psi) == (3.5, 2.5, Strength.MODERATE)


@given(
    st.floats(1, 500, allow_nan=False),
    st.integers(1, 60),
    st.integers(1, 16),
    st.booleans(),
    st.booleans(),
    st.sampled_from(["dispatch", "completion"]),
    st.sampled_from(["none", "weak", "moderate", "strong"]),
)
def test_yaml_round_trip(minutes, turns, workers, a2, full, order, psi):
    c = RunConfig(soft_deadline_minutes=minutes, max_turn=turns, worker_cap=workers, commit_order=order)
    c.ablation = Ablation(a2=a2, full=full)
    c.thresholds.tau_psi = psi
    c.endpoints.models = {"planner": "m"}
    back = RunConfig.loads(c.dumps())
    assert back == c
    assert back.dumps() == c.dumps()


def test_file_and_env(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("max_turn: 7\nthresholds: {tau_h: 3.0}\n")
    c = RunConfig.load(p, env={"SOFT_DEADLINE_MINUTES": "5", "COGNIGRAPH_SEARCH_URL": "http://s"})
    assert c.max_turn == 7 and c.thresholds.tau_h == 3.0 and c.thresholds.tau_l == 2.5
    assert c.soft_deadline_minutes == 5.0 and c.endpoints.search_url == "http://s"


@pytest.mark.parametrize("text", ["bogus: 1\n", "backend: cloud\n", "commit_order: random\n"])
def test_invalid_config_rejected(text):
    with pytest.raises(ValueError):
        RunConfig.loads(text)


def test_no_ablation_keeps_default_wiring():
    w = apply_ablation(RunConfig())
    assert w == EngineWiring() and not w.ablated


@pytest.mark.parametrize(
    "flag,check",
    [
        ("a1", lambda w: not w.use_router and not w.strategy_table and w.interpretive_update),
        ("a2", lambda w: w.allowed_ops == RESTRICTED_OPS and w.use_router and w.show_edges),
        ("a3", lambda w: not w.interpretive_update and w.allowed_ops is None),
        ("a4", lambda w: not w.show_edges and not w.upstream_context and w.unit_label == "research dimension"),
    ],
)
def test_each_ablation_touches_only_its_component(flag, check):
    w = apply_ablation(RunConfig(ablation=Ablation(**{flag: True})))
    assert check(w) and w.ablations == (flag,)


def test_full_sets_all_four():
    assert Ablation(full=True).active == ["a1", "a2", "a3", "a4"]
