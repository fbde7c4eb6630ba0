"""Question parsing into the starting graph."""

from __future__ import annotations

import logging

from ..errors import CognigraphError
from ..graph import (
    CognitiveGraph,
    CognitiveState,
    ConceptNode,
    EdgeStatus,
    NodeType,
    RelationEdge,
    StructureType,
    recompute_hops,
)
from .backend import BackendFailure, ChatBackend, Role, SchemaError, complete_json
from .prompts import render

log = logging.getLogger(__name__)


class UnparsableQuery(CognigraphError):
    pass


def graph_from_payload(payload: dict, query: str = "") -> CognitiveGraph:
    if not isinstance(payload, dict) or not payload.get("nodes"):
        raise SchemaError("graph payload needs nodes")
    g = CognitiveGraph(
        structure_type=StructureType(payload.get("structure_type", "mixed")),
        query=payload.get("query", query),
    )
    protected = set(payload.get("user_protected", []))
    for nd in payload["nodes"]:
        node = ConceptNode(
            id=nd["id"],
            name=nd.get("name", nd["id"]),
            node_type=NodeType(nd.get("node_type", "placeholder")),
            type_constraint=nd.get("type_constraint", ""),
            condition_constraints=list(nd.get("condition_constraints", [])),
            discovery_dependency=set(nd.get("discovery_dependency", [])),
            core_criteria=list(nd.get("core_criteria", [])),
            supplementary_criteria=list(nd.get("supplementary_criteria", [])),
        )
        node.core_pending = list(node.core_criteria)
        node.supplementary_pending = list(node.supplementary_criteria)
        g.add_node(node)
        if nd.get("user_named") or node.is_start:
            protected.add(node.id)
    for ed in payload.get("edges", []):
        edge = RelationEdge.from_dict({**ed, "status": "to_solve", "attempt_count": 0})
        g.add_edge(edge)
    if not g.root_ids:
        raise SchemaError("graph has no start node")
    if not protected <= set(g.nodes):
        raise SchemaError("protected set names unknown nodes")
    g.user_protected = protected
    recompute_hops(g)
    assert all(e.status is EdgeStatus.TO_SOLVE for e in g.edges.values())
    assert all(n.cognitive_state in (CognitiveState.START, CognitiveState.UNKNOWN) for n in g.nodes.values())
    return g


def parse_question(query: str, backend: ChatBackend, retries: int = 2) -> CognitiveGraph:
    if not query.strip():
        raise UnparsableQuery("empty query")
    prompt = render("parser", query=query)
    try:
        return complete_json(
            backend,
            Role.PARSER,
            prompt,
            lambda p: graph_from_payload(p, query),
            schema="graph",
            key="query",
            retries=retries,
        )
    except (SchemaError, BackendFailure) as exc:
        raise UnparsableQuery(str(exc)) from exc
