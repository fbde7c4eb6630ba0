from __future__ import annotations

import pytest

from cognigraph.actions import (
    ActionParseError,
    AddTask,
    ExclusivityError,
    Finish,
    ProposeRestructure,
    parse_planner_output,
    turn_from_dict,
)
from cognigraph.graph import TaskType
from cognigraph.restructuring import OpType


def test_json_add_task_batch():
    turn = parse_planner_output({"actions": [
        {"type": "add_task", "task_id": "t1", "edge_id": "r1", "target_node_id": "n1", "core_criteria": "size"},
        {"type": "add_task", "task_id": "t2", "cognitive_edge_id": "r2", "cognitive_target_id": "n2", "task_type": "specified", "specified_source": "nbim.no"},
    ]})
    assert turn.kind == "add_task"
    a, b = turn.actions
    assert isinstance(a, AddTask) and a.task.core_criteria == ["size"]
    assert b.task.edge_id == "r2" and b.task.task_type is TaskType.SPECIFIED


def test_empty_turn_is_reflection():
    turn = parse_planner_output({"actions": [], "note": "thinking"})
    assert turn.kind == "reflect" and turn.note == "thinking"


def test_code_syntax():
    text = """I will now expand the fund node.

```python
propose_restructure(op_type="conc", focus="e2", rationale="four funds found")
```
"""
    turn = parse_planner_output(text)
    assert turn.kind == "propose_restructure"
    act = turn.actions[0]
    assert isinstance(act, ProposeRestructure) and act.intent.op_type is OpType.CONC and act.intent.focus == "e2"
    assert "expand" in turn.note


def test_prose_only_reply_is_reflection():
    assert parse_planner_output("Let me think about the graph first.").kind == "reflect"


def test_finish_call():
    turn = parse_planner_output("```\nfinish()\n```")
    assert isinstance(turn.actions[0], Finish)


@pytest.mark.parametrize(
    "actions",
    [
        [{"type": "add_task", "task_id": "t"}, {"type": "finish"}],
        [{"type": "finish"}, {"type": "finish"}],
        [{"type": "propose_restructure", "op_type": "aug"}, {"type": "propose_restructure", "op_type": "prune"}],
    ],
)
def test_exclusivity(actions):
    with pytest.raises(ExclusivityError):
        turn_from_dict({"actions": actions})


def test_unknown_operator_keeps_raw_name():
    turn = turn_from_dict({"actions": [{"type": "propose_restructure", "op_type": "merge"}]})
    act = turn.actions[0]
    assert act.intent is None and act.raw_op == "merge"


@pytest.mark.parametrize(
    "payload",
    [
        {"actions": [{"type": "teleport"}]},
        {"actions": [{"type": "add_task"}]},
        "```python\nadd_task(task_id=foo)\n```",
        "```python\nadd_task(\n```",
        42,
    ],
)
def test_parse_errors(payload):
    with pytest.raises(ActionParseError):
        parse_planner_output(payload)


def test_json_string_payload():
    turn = parse_planner_output('{"actions": [{"type": "finish"}]}')
    assert turn.kind == "finish"
