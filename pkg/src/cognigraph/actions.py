"""Planner action types and parsing of planner output (JSON or call syntax)."""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import CognigraphError
from .graph import TaskType
from .restructuring import PatternMismatch, RestructureIntent


class ExclusivityError(CognigraphError):
    """A turn mixed action kinds or issued more than one restructure/finish."""


class ActionParseError(CognigraphError):
    pass


@dataclass
class SearchTask:
    task_id: str
    edge_id: str
    target_node_id: str
    node_name: str = ""
    task_type: TaskType = TaskType.OPEN
    specified_source: str | None = None
    core_criteria: list[str] = field(default_factory=list)
    supplementary_criteria: list[str] = field(default_factory=list)
    node_content: str = ""
    is_verification: bool = False
    strategy: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["task_type"] = self.task_type.value
        return d


@dataclass
class AddTask:
    task: SearchTask


@dataclass
class ProposeRestructure:
    # intent is None when the planner named an operator outside the alphabet
    intent: RestructureIntent | None
    realization_key: str | None = None
    raw_op: str = ""


@dataclass
class Finish:
    pass


PlannerAction = Union[AddTask, ProposeRestructure, Finish]


@dataclass
class PlannerTurn:
    actions: list[PlannerAction] = field(default_factory=list)
    note: str = ""

    @property
    def kind(self) -> str:
        if not self.actions:
            return "reflect"
        first = self.actions[0]
        return {AddTask: "add_task", ProposeRestructure: "propose_restructure", Finish: "finish"}[type(first)]


def check_exclusive(turn: PlannerTurn) -> PlannerTurn:
    kinds = {type(a) for a in turn.actions}
    if len(kinds) > 1:
        raise ExclusivityError(f"turn mixes {sorted(k.__name__ for k in kinds)}")
    if kinds & {ProposeRestructure, Finish} and len(turn.actions) > 1:
        raise ExclusivityError(f"only one {turn.kind} per turn")
    return turn


def _list(v) -> list[str]:
    if v is None:
        return []
    if isinstance(v, str):
        return [v]
    return [str(x) for x in v]


def action_from_dict(d: dict[str, Any]) -> PlannerAction:
    kind = d.get("type")
    if kind == "add_task":
        task_id = d.get("task_id") or d.get("node_name")
        if not task_id:
            raise ActionParseError("add_task without task id")
        return AddTask(
            SearchTask(
                task_id=task_id,
                edge_id=d.get("edge_id") or d.get("cognitive_edge_id") or "",
                target_node_id=d.get("target_node_id") or d.get("cognitive_target_id") or "",
                node_name=d.get("node_name", task_id),
                task_type=TaskType(d.get("task_type", "open")),
                specified_source=d.get("specified_source"),
                core_criteria=_list(d.get("core_criteria")),
                supplementary_criteria=_list(d.get("supplementary_criteria")),
                node_content=d.get("node_content", ""),
                is_verification=bool(d.get("is_verification", False)),
                strategy=d.get("strategy"),
            )
        )
    if kind == "propose_restructure":
        raw = str(d.get("op_type", ""))
        try:
            intent: RestructureIntent | None = RestructureIntent.from_dict(d)
        except PatternMismatch:
            intent = None
        return ProposeRestructure(intent, d.get("realization"), raw)
    if kind == "finish":
        return Finish()
    raise ActionParseError(f"unknown action type {kind!r}")


def turn_from_dict(d: dict[str, Any]) -> PlannerTurn:
    actions = [action_from_dict(a) for a in d.get("actions", [])]
    return check_exclusive(PlannerTurn(actions, d.get("note", "")))


_CODE = re.compile(r"```(?:python)?\s*(.*?)```", re.DOTALL)
_CALLS = {"add_task", "propose_restructure", "finish"}


def turn_from_code(text: str) -> PlannerTurn:
    """Parse planner output written as Python calls; a reply without code is a reflection."""
    blocks = _CODE.findall(text)
    if not blocks:
        return PlannerTurn([], text.strip())
    actions: list[PlannerAction] = []
    for block in blocks:
        try:
            tree = ast.parse(block)
        except SyntaxError as exc:
            raise ActionParseError(f"planner code does not parse: {exc}") from None
        for node in ast.walk(tree):
            if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _CALLS:
                kwargs = {}
                for kw in node.keywords:
                    try:
                        kwargs[kw.arg] = ast.literal_eval(kw.value)
                    except ValueError:
                        raise ActionParseError(f"non-literal argument {kw.arg!r}") from None
                kwargs["type"] = node.func.id
                actions.append(action_from_dict(kwargs))
    prose = _CODE.sub("", text).strip()
    return check_exclusive(PlannerTurn(actions, prose))


def parse_planner_output(payload: Any) -> PlannerTurn:
    if isinstance(payload, dict):
        return turn_from_dict(payload)
    if isinstance(payload, str):
        stripped = payload.strip()
        if stripped.startswith("{"):
            return turn_from_dict(json.loads(stripped))
        return turn_from_code(payload)
    raise ActionParseError(f"unsupported planner payload {type(payload).__name__}")
