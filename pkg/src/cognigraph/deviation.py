"""Page credibility composites, node quality aggregation and the strategy router."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import CognigraphError
from .graph import WINDOW_CAPACITY, Barrier, PageEntry, QualityProfile, Strength

TAU_HIGH = 3.5
TAU_LOW = 2.5
TAU_PSI = Strength.MODERATE

CR_WEIGHTS = (0.30, 0.70)  # currency, relevance
AAP_WEIGHTS = (0.40, 0.35, 0.25)  # authority, accuracy, purpose


class InaccessiblePage(CognigraphError):
    pass


class Strategy(str, Enum):
    SUBSTITUTE = "substitute"
    EXPLOIT = "exploit"
    VERIFY = "verify"
    PIVOT = "pivot"
    EXPLORE = "explore"


@dataclass(frozen=True)
class PageRating:
    currency: int
    relevance: int
    authority: int
    accuracy: int
    purpose: int
    accessible: bool = True
    barrier: Barrier | None = None

    def __post_init__(self):
        for name in ("currency", "relevance", "authority", "accuracy", "purpose"):
            v = getattr(self, name)
            if not 1 <= v <= 5:
                raise ValueError(f"{name} rating {v} outside [1, 5]")
        if self.accessible == (self.barrier is not None):
            raise ValueError("barrier must be set exactly when the page is inaccessible")

    @classmethod
    def from_tuple(cls, t, barrier: str | None = None) -> "PageRating":
        b = Barrier(barrier) if barrier else None
        return cls(*t, accessible=b is None, barrier=b)

    def to_dict(self) -> dict:
        return {
            "c": self.currency,
            "r": self.relevance,
            "alpha": self.authority,
            "beta": self.accuracy,
            "rho": self.purpose,
            "barrier": self.barrier.value if self.barrier else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PageRating":
        return cls.from_tuple((d["c"], d["r"], d["alpha"], d["beta"], d["rho"]), d.get("barrier"))


@dataclass(frozen=True)
class DeviationSignal:
    mean_cr: float
    mean_aap: float
    phi: bool
    psi: Strength

    @classmethod
    def from_profile(cls, qp: QualityProfile) -> "DeviationSignal":
        # an untouched node has no composites; treat it as the scale floor
        return cls(
            mean_cr=qp.mean_cr if qp.mean_cr is not None else 1.0,
            mean_aap=qp.mean_aap if qp.mean_aap is not None else 1.0,
            phi=qp.phi,
            psi=qp.unexpected_strength,
        )

    def to_dict(self) -> dict:
        return {
            "mean_cr": round(self.mean_cr, 4),
            "mean_aap": round(self.mean_aap, 4),
            "phi": int(self.phi),
            "psi": self.psi.value,
        }


def page_composites(rating: PageRating) -> tuple[float, float]:
    if not rating.accessible:
        raise InaccessiblePage(f"page gated by {rating.barrier.value if rating.barrier else 'unknown'}")
    cr = CR_WEIGHTS[0] * rating.currency + CR_WEIGHTS[1] * rating.relevance
    aap = (
        AAP_WEIGHTS[0] * rating.authority
        + AAP_WEIGHTS[1] * rating.accuracy
        + AAP_WEIGHTS[2] * rating.purpose
    )
    return cr, aap


def page_entry(rating: PageRating) -> PageEntry:
    if not rating.accessible:
        return PageEntry(None, None, rating.barrier)
    cr, aap = page_composites(rating)
    return PageEntry(cr, aap)


def aggregate_profile(
    window: Iterable[PageEntry | tuple[float, float]],
    barriers: Iterable[Barrier] = (),
    psi: Strength = Strength.NONE,
    finding_strength: Strength = Strength.NONE,
) -> QualityProfile:
    entries = [w if isinstance(w, PageEntry) else PageEntry(*w) for w in window]
    return QualityProfile(
        page_window=deque(entries, maxlen=WINDOW_CAPACITY),
        finding_strength=finding_strength,
        unexpected_strength=psi,
        accessibility_barriers=list(dict.fromkeys(barriers)),
    )


def select_strategy(
    delta: DeviationSignal, tau_h: float = TAU_HIGH, tau_psi: Strength = TAU_PSI
) -> Strategy:
    if delta.phi:
        return Strategy.SUBSTITUTE
    relevant = delta.mean_cr >= tau_h
    credible = delta.mean_aap >= tau_h
    if relevant and credible:
        return Strategy.EXPLOIT
    if relevant:
        return Strategy.VERIFY
    if delta.psi >= tau_psi:
        return Strategy.PIVOT
    return Strategy.EXPLORE


def quality_gap(delta: DeviationSignal, tau_l: float = TAU_LOW) -> bool:
    return delta.mean_cr < tau_l and delta.mean_aap < tau_l


def psi_ordinal_to_scalar(psi: Strength) -> float:
    return float(Strength(psi).rank + 1)
