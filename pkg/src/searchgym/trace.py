"""ReAct trajectory parsing, macro-action classification, observation masking.

A well-formed assistant turn is exactly one <think> block followed by exactly
one action block (<tool_call> with a JSON payload, or <answer>), with nothing
but whitespace in between. Anything else parses to a Malformed action carrying
machine-readable violation codes; parsing itself never fails.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Union

from .tooldefs import ToolSchema

# Turn-level violation codes (closed set).
MISSING_THINK = "missing_think"
MULTIPLE_ACTIONS = "multiple_actions"
STRAY_TEXT = "stray_text"
BAD_JSON = "bad_json"
UNKNOWN_TOOL = "unknown_tool"
UNKNOWN_TAG = "unknown_tag"
MISSING_ANSWER = "missing_answer"

# Tool-argument violation codes used by validate_tool_json.
MISSING_REQUIRED = "missing_required"
TYPE_MISMATCH = "type_mismatch"

MACRO_TOOL_CALL = "ToolCall"
MACRO_ANSWER = "Answer"

TERMINAL_ANSWERED = "answered"
TERMINAL_TRUNCATED = "truncated"


class TraceIntegrityError(Exception):
    """Observation bookkeeping does not line up with the turns."""


class TraceFormatError(Exception):
    """Serialized trace JSON has the wrong shape."""


@dataclass(frozen=True)
class ToolCallAction:
    name: str
    arguments: dict


@dataclass(frozen=True)
class AnswerAction:
    answer: str


@dataclass(frozen=True)
class Malformed:
    violations: tuple[str, ...]


Action = Union[ToolCallAction, AnswerAction, Malformed]


@dataclass
class ReActTurn:
    raw: str
    think: str | None
    action: Action

    @property
    def is_well_formed(self) -> bool:
        return not isinstance(self.action, Malformed)


@dataclass
class ReActTrace:
    turns: list[ReActTurn]
    observations: list[str] = field(default_factory=list)
    terminal: str = TERMINAL_TRUNCATED


_BLOCK_RE = re.compile(r"<(think|tool_call|answer)>(.*?)</\1>", re.DOTALL)
_UNKNOWN_ELEMENT_RE = re.compile(r"<([A-Za-z_][\w-]*)>.*?</\1>", re.DOTALL)
_UNKNOWN_TAG_RE = re.compile(r"</?[A-Za-z_][\w-]*>")


def parse_turn(text: str) -> ReActTurn:
    """Total parser: returns a well-formed turn or one violation per defect."""
    violations: list[str] = []
    blocks = [(m.group(1), m.group(2), m.span()) for m in _BLOCK_RE.finditer(text)]

    residue_parts: list[str] = []
    pos = 0
    for _, _, (start, end) in blocks:
        residue_parts.append(text[pos:start])
        pos = end
    residue_parts.append(text[pos:])
    residue = "".join(residue_parts)

    thinks = [b for b in blocks if b[0] == "think"]
    actions = [b for b in blocks if b[0] in ("tool_call", "answer")]

    think = thinks[0][1] if thinks else None
    if not thinks:
        violations.append(MISSING_THINK)
    if len(thinks) > 1:
        violations.append(STRAY_TEXT)
    if not actions:
        violations.append(MISSING_ANSWER)
    if len(actions) > 1:
        violations.append(MULTIPLE_ACTIONS)
    if thinks and actions and blocks[0][0] != "think":
        violations.append(STRAY_TEXT)

    without_elements = _UNKNOWN_ELEMENT_RE.sub("", residue)
    stray_tags = _UNKNOWN_TAG_RE.search(without_elements)
    if without_elements != residue or stray_tags:
        violations.append(UNKNOWN_TAG)
    if _UNKNOWN_TAG_RE.sub("", without_elements).strip():
        violations.append(STRAY_TEXT)

    action: Action | None = None
    if len(actions) == 1:
        kind, payload, _ = actions[0]
        if kind == "answer":
            action = AnswerAction(payload.strip())
        else:
            action = _parse_tool_payload(payload, violations)

    if violations:
        deduped = tuple(dict.fromkeys(violations))
        return ReActTurn(raw=text, think=think, action=Malformed(deduped))
    return ReActTurn(raw=text, think=think, action=action)


def _parse_tool_payload(payload: str, violations: list[str]) -> ToolCallAction | None:
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError:
        violations.append(BAD_JSON)
        return None
    if not isinstance(obj, dict) or not isinstance(obj.get("name"), str):
        violations.append(BAD_JSON)
        return None
    arguments = obj.get("arguments", {})
    if isinstance(arguments, str):
        try:
            arguments = json.loads(arguments)
        except json.JSONDecodeError:
            violations.append(BAD_JSON)
            return None
    if not isinstance(arguments, dict):
        violations.append(BAD_JSON)
        return None
    return ToolCallAction(name=obj["name"], arguments=arguments)


def classify_macro_action(trace: ReActTrace) -> str:
    """ToolCall if any turn called a tool, otherwise Answer."""
    for turn in trace.turns:
        if isinstance(turn.action, ToolCallAction):
            return MACRO_TOOL_CALL
    return MACRO_ANSWER


def final_answer_text(trace: ReActTrace) -> str:
    if trace.turns and isinstance(trace.turns[-1].action, AnswerAction):
        return trace.turns[-1].action.answer
    return ""


def assemble_transcript(trace: ReActTrace) -> tuple[str, list[tuple[int, int]]]:
    """Join turns and observations into one text; return observation spans.

    Turns are separated by a newline; each tool observation follows its turn
    after a newline. Spans cover exactly the observation characters.
    """
    tool_turns = sum(isinstance(t.action, ToolCallAction) for t in trace.turns)
    if tool_turns != len(trace.observations):
        raise TraceIntegrityError(
            f"{tool_turns} tool-call turns but {len(trace.observations)} observations"
        )
    parts: list[str] = []
    spans: list[tuple[int, int]] = []
    length = 0
    observations = iter(trace.observations)
    for turn in trace.turns:
        if parts:
            parts.append("\n")
            length += 1
        parts.append(turn.raw)
        length += len(turn.raw)
        if isinstance(turn.action, ToolCallAction):
            parts.append("\n")
            length += 1
            obs = next(observations)
            spans.append((length, length + len(obs)))
            parts.append(obs)
            length += len(obs)
    return "".join(parts), spans


def mask_spans(trace: ReActTrace) -> list[tuple[int, int]]:
    """Character spans of every tool observation in the assembled transcript."""
    return assemble_transcript(trace)[1]


def validate_tool_json(payload: dict, registry: dict[str, ToolSchema]) -> list[str]:
    """Check a {"name", "arguments"} payload against the registry schemas."""
    name = payload.get("name")
    arguments = payload.get("arguments")
    if arguments is None:
        arguments = {}
    if name not in registry:
        return [UNKNOWN_TOOL]
    if not isinstance(arguments, dict):
        return [TYPE_MISMATCH]
    schema = registry[name]
    violations: list[str] = []
    for required in schema.required:
        if required not in arguments:
            violations.append(MISSING_REQUIRED)
    properties = schema.parameters.get("properties", {})
    for key, value in arguments.items():
        prop = properties.get(key)
        if prop is not None and not _type_ok(value, prop):
            violations.append(TYPE_MISMATCH)
    return violations


def validate_tool_call(action: ToolCallAction, registry: dict[str, ToolSchema]) -> list[str]:
    return validate_tool_json({"name": action.name, "arguments": action.arguments}, registry)


def _type_ok(value, prop: dict) -> bool:
    kind = prop.get("type")
    if kind == "array":
        if not isinstance(value, list):
            return False
        items = prop.get("items")
        if items:
            return all(_type_ok(v, items) for v in value)
        return True
    if kind == "string":
        return isinstance(value, str)
    if kind == "object":
        return isinstance(value, dict)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    return True


def action_to_json(action: Action) -> dict:
    if isinstance(action, ToolCallAction):
        return {"type": "tool_call", "name": action.name, "arguments": action.arguments}
    if isinstance(action, AnswerAction):
        return {"type": "answer", "answer": action.answer}
    return {"type": "malformed", "violations": list(action.violations)}


def action_from_json(data: dict) -> Action:
    kind = data.get("type")
    if kind == "tool_call":
        return ToolCallAction(name=data["name"], arguments=data["arguments"])
    if kind == "answer":
        return AnswerAction(answer=data["answer"])
    if kind == "malformed":
        return Malformed(violations=tuple(data["violations"]))
    raise TraceFormatError(f"unknown action type: {kind!r}")


def turn_to_json(turn: ReActTurn) -> dict:
    return {"raw": turn.raw, "think": turn.think, "action": action_to_json(turn.action)}


def turn_from_json(data: dict) -> ReActTurn:
    return ReActTurn(
        raw=data["raw"], think=data.get("think"), action=action_from_json(data["action"])
    )


def trace_to_json(trace: ReActTrace) -> dict:
    return {
        "turns": [turn_to_json(t) for t in trace.turns],
        "observations": list(trace.observations),
        "terminal": trace.terminal,
    }


def trace_from_json(data: dict) -> ReActTrace:
    try:
        turns = [turn_from_json(t) for t in data["turns"]]
        observations = [str(o) for o in data.get("observations", [])]
        terminal = data.get("terminal", TERMINAL_TRUNCATED)
    except (KeyError, TypeError) as exc:
        raise TraceFormatError(f"bad trace record: {exc}") from exc
    if terminal not in (TERMINAL_ANSWERED, TERMINAL_TRUNCATED):
        raise TraceFormatError(f"bad terminal value: {terminal!r}")
    return ReActTrace(turns=turns, observations=observations, terminal=terminal)
