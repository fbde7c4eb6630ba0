"""Run configuration (YAML plus environment overrides) and ablation wiring."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import CognigraphError
from .graph import Strength
from .restructuring import OpType


class ConflictingFlags(CognigraphError):
    pass


@dataclass
class Thresholds:
    tau_h: float = 3.5
    tau_l: float = 2.5
    tau_psi: str = "moderate"

    @property
    def psi(self) -> Strength:
        return Strength(self.tau_psi)


@dataclass
class Ablation:
    a1: bool = False  # no deviation signal or router
    a2: bool = False  # restructuring limited to aug/prune
    a3: bool = False  # raw concatenation instead of interpretive update
    a4: bool = False  # flat dimension list, no edges
    full: bool = False

    def __post_init__(self):
        if self.full:
            self.a1 = self.a2 = self.a3 = self.a4 = True

    @property
    def active(self) -> list[str]:
        return [n for n in ("a1", "a2", "a3", "a4") if getattr(self, n)]


@dataclass
class Endpoints:
    chat_base_url: str = ""
    search_url: str = ""
    page_url: str = ""
    models: dict[str, str] = field(default_factory=dict)


@dataclass
class RunConfig:
    backend: str = "scripted"
    soft_deadline_minutes: float = 70.0
    max_turn: int = 20
    worker_cap: int = 4
    thresholds: Thresholds = field(default_factory=Thresholds)
    ablation: Ablation = field(default_factory=Ablation)
    output_dir: str = "runs/latest"
    page_limit: int | None = None
    cross_route_cap: int = 2
    outline_min_records: int = 2
    schema_retries: int = 2
    tail_cap: int = 15_000
    commit_order: str = "dispatch"
    endpoints: Endpoints = field(default_factory=Endpoints)

    def __post_init__(self):
        if self.backend not in ("real", "scripted"):
            raise ValueError(f"backend must be real or scripted, not {self.backend!r}")
        if self.commit_order not in ("dispatch", "completion"):
            raise ValueError(f"commit_order must be dispatch or completion, not {self.commit_order!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "thresholds" in d:
            d["thresholds"] = Thresholds(**d["thresholds"])
        if "ablation" in d:
            d["ablation"] = Ablation(**d["ablation"])
        if "endpoints" in d:
            d["endpoints"] = Endpoints(**d["endpoints"])
        return cls(**d)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(text) or {})

    @classmethod
    def load(cls, path: Path | str | None = None, env: dict[str, str] | None = None) -> "RunConfig":
        cfg = cls.loads(Path(path).read_text(encoding="utf-8")) if path else cls()
        return apply_env(cfg, os.environ if env is None else env)


_ENV = {
    "SOFT_DEADLINE_MINUTES": ("soft_deadline_minutes", float),
    "COGNIGRAPH_MAX_TURN": ("max_turn", int),
    "COGNIGRAPH_WORKERS": ("worker_cap", int),
    "COGNIGRAPH_BACKEND": ("backend", str),
    "COGNIGRAPH_PAGE_LIMIT": ("page_limit", int),
    "COGNIGRAPH_OUTPUT_DIR": ("output_dir", str),
}
_ENV_ENDPOINTS = {
    "COGNIGRAPH_CHAT_URL": "chat_base_url",
    "COGNIGRAPH_SEARCH_URL": "search_url",
    "COGNIGRAPH_PAGE_URL": "page_url",
}


def apply_env(cfg: RunConfig, env) -> RunConfig:
    for var, (name, conv) in _ENV.items():
        if env.get(var):
            setattr(cfg, name, conv(env[var]))
    for var, name in _ENV_ENDPOINTS.items():
        if env.get(var):
            setattr(cfg.endpoints, name, env[var])
    cfg.__post_init__()
    return cfg


@dataclass
class EngineWiring:
    """How the engine is composed; ablations produce a different composition."""

    use_router: bool = True
    strategy_table: bool = True
    allowed_ops: frozenset[OpType] | None = None
    interpretive_update: bool = True
    show_edges: bool = True
    upstream_context: bool = True
    unit_label: str = "entity"
    ablations: tuple[str, ...] = ()

    @property
    def ablated(self) -> bool:
        return bool(self.ablations)


RESTRICTED_OPS = frozenset({OpType.AUG, OpType.PRUNE})


def apply_ablation(config: RunConfig, wiring: EngineWiring | None = None) -> EngineWiring:
    w = wiring or EngineWiring()
    ab = config.ablation
    if not ab.active:
        return w
    if ab.a1:
        w.use_router = False
        w.strategy_table = False
    if ab.a2:
        w.allowed_ops = RESTRICTED_OPS if w.allowed_ops is None else w.allowed_ops & RESTRICTED_OPS
    if ab.a3:
        w.interpretive_update = False
    if ab.a4:
        w.show_edges = False
        w.upstream_context = False
        w.unit_label = "research dimension"
        w.allowed_ops = RESTRICTED_OPS if w.allowed_ops is None else w.allowed_ops & RESTRICTED_OPS
    w.ablations = tuple(ab.active)
    return w
