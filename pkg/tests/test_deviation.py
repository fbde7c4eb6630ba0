from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cognigraph.deviation import (
    DeviationSignal,
    PageRating,
    Strategy,
    aggregate_profile,
    page_composites,
    page_entry,
    psi_ordinal_to_scalar,
    quality_gap,
    select_strategy,
)
from cognigraph.graph import Barrier, PageEntry, QualityProfile, Strength, WINDOW_CAPACITY

likert = st.integers(1, 5)


def test_composites_worked_example():
    cr, aap = page_composites(PageRating(4, 4, 5, 4, 3))
    assert cr == pytest.approx(4.00, abs=1e-9)
    assert aap == pytest.approx(4.15, abs=1e-9)


@given(likert, likert, likert, likert, likert)
def test_composites_stay_in_likert_range(c, r, a, b, p):
    cr, aap = page_composites(PageRating(c, r, a, b, p))
    assert 1 <= cr <= 5 and 1 <= aap <= 5


@given(likert, likert, likert, likert, likert, likert, likert)
def test_relevance_composite_ignores_credibility_fields(c, r, a, b, p, a2, b2):
    # the two composites are computed from disjoint rating fields
    assert page_composites(PageRating(c, r, a, b, p))[0] == page_composites(PageRating(c, r, a2, b2, p))[0]


def test_rating_range_enforced():
    with pytest.raises(ValueError):
        PageRating(0, 3, 3, 3, 3)
    with pytest.raises(ValueError):
        PageRating(3, 3, 3, 3, 6)


def test_barrier_must_match_accessibility():
    with pytest.raises(ValueError):
        PageRating(3, 3, 3, 3, 3, accessible=False)
    with pytest.raises(ValueError):
        PageRating(3, 3, 3, 3, 3, barrier=Barrier.PAYWALL)


def test_inaccessible_page_has_no_composites():
    gated = PageRating(3, 2, 3, 3, 3, accessible=False, barrier=Barrier.PAYWALL)
    entry = page_entry(gated)
    assert entry.cr is None and entry.barrier is Barrier.PAYWALL


def test_rating_dict_round_trip():
    r = PageRating(2, 3, 4, 5, 1, accessible=False, barrier=Barrier.LOGIN_REQUIRED)
    assert PageRating.from_dict(r.to_dict()) == r


# ---- router -----------------------------------------------------------------


def oracle(cr: float, aap: float, phi: int, psi: int) -> str:
    """Written from the decision tree: accessible? relevant? credible? then unexpected strength."""
    if phi == 1:
        return "substitute"
    if cr >= 3.5 and aap >= 3.5:
        return "exploit"
    if cr >= 3.5:
        return "verify"
    if psi >= 3:
        return "pivot"
    return "explore"


PSI = {1: Strength.NONE, 2: Strength.WEAK, 3: Strength.MODERATE, 4: Strength.STRONG}
GRID = [round(1 + 0.1 * i, 1) for i in range(41)]


def test_router_grid_matches_oracle():
    count = 0
    for cr, aap, phi, psi in itertools.product(GRID, GRID, (0, 1), (1, 2, 3, 4)):
        got = select_strategy(DeviationSignal(cr, aap, bool(phi), PSI[psi]))
        assert isinstance(got, Strategy)
        assert got.value == oracle(cr, aap, phi, psi), (cr, aap, phi, psi)
        count += 1
    assert count == 41 * 41 * 2 * 4


def test_router_threshold_is_inclusive():
    assert select_strategy(DeviationSignal(3.5, 3.5, False, Strength.NONE)) is Strategy.EXPLOIT
    assert select_strategy(DeviationSignal(3.49, 3.5, False, Strength.STRONG)) is Strategy.PIVOT


def test_nbim_profile_routes_to_exploit():
    assert select_strategy(DeviationSignal(3.9, 4.4, False, Strength.NONE)) is Strategy.EXPLOIT


def test_signal_from_empty_profile_defaults_to_floor():
    d = DeviationSignal.from_profile(QualityProfile())
    assert (d.mean_cr, d.mean_aap, d.phi) == (1.0, 1.0, False)
    assert select_strategy(d) is Strategy.EXPLORE


def test_quality_gap_needs_both_low():
    assert quality_gap(DeviationSignal(2.4, 2.4, False, Strength.NONE))
    assert not quality_gap(DeviationSignal(2.4, 2.5, False, Strength.NONE))


def test_psi_ordinal_scalar():
    assert [psi_ordinal_to_scalar(s) for s in (Strength.NONE, Strength.WEAK, Strength.MODERATE, Strength.STRONG)] == [1, 2, 3, 4]


# ---- rolling window ---------------------------------------------------------


def test_window_keeps_last_fifty_pages():
    ratings = [PageRating(1 + i % 5, 1 + (i * 3) % 5, 1 + (i * 7) % 5, 1 + (i * 2) % 5, 1 + (i * 4) % 5) for i in range(55)]
    profile = QualityProfile()
    for r in ratings:
        profile.page_window.append(page_entry(r))
    assert len(profile.page_window) == WINDOW_CAPACITY
    tail = ratings[-50:]
    want_cr = math.fsum(0.3 * r.currency + 0.7 * r.relevance for r in tail) / 50
    want_aap = math.fsum(0.4 * r.authority + 0.35 * r.accuracy + 0.25 * r.purpose for r in tail) / 50
    assert profile.mean_cr == pytest.approx(want_cr, abs=1e-9)
    assert profile.mean_aap == pytest.approx(want_aap, abs=1e-9)


@given(st.lists(st.tuples(likert, likert, likert, likert, likert, st.booleans()), min_size=1, max_size=80))
def test_inaccessible_pages_never_enter_means(rows):
    profile = QualityProfile()
    for c, r, a, b, p, gated in rows:
        rating = PageRating(c, r, a, b, p, accessible=not gated, barrier=Barrier.PAYWALL if gated else None)
        profile.page_window.append(page_entry(rating))
    profile.accessibility_barriers = [e.barrier for e in profile.page_window if e.barrier]
    window = rows[-WINDOW_CAPACITY:]
    open_rows = [x for x in window if not x[5]]
    if open_rows:
        want = math.fsum(0.3 * x[0] + 0.7 * x[1] for x in open_rows) / len(open_rows)
        assert profile.mean_cr == pytest.approx(want, abs=1e-9)
    else:
        assert profile.mean_cr is None
    assert profile.phi == any(x[5] for x in window)


def test_aggregate_profile_dedups_barriers():
    p = aggregate_profile([(4.0, 4.0), PageEntry(None, None, Barrier.PAYWALL)], [Barrier.PAYWALL, Barrier.PAYWALL], Strength.WEAK, Strength.STRONG)
    assert p.accessibility_barriers == [Barrier.PAYWALL]
    assert p.mean_cr == 4.0 and p.phi
    assert p.unexpected_strength is Strength.WEAK and p.finding_strength is Strength.STRONG
