"""Reward computation: outcome, behavior, format components and five composites.

The decomposed configuration is the primary one: it pays the outcome weight
for a correct answer and a dense process reward for acting well (tool use
aligned with the sample's behavioral tag, plus syntactic validity). The other
four configurations reproduce common alternatives for comparison, including
the multiplicative tool-call penalty whose maximum attainable reward drops
whenever a tool is used.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .prompts import render_judge_prompt
from .tooldefs import ToolSchema, default_registry
from .trace import (
    AnswerAction,
    MACRO_TOOL_CALL,
    Malformed,
    ReActTrace,
    TERMINAL_ANSWERED,
    ToolCallAction,
    classify_macro_action,
    final_answer_text,
    validate_tool_call,
)

logger = logging.getLogger(__name__)

TOOL_REQUIRED = "tool_required"
TOOL_FREE = "tool_free"
METADATA_TAGS = (TOOL_REQUIRED, TOOL_FREE)


class ScoringError(Exception):
    """Judge unavailable after retries; never silently coerced to 0."""


class JudgeTransportError(Exception):
    """Retryable failure reaching an external judge."""


@dataclass(frozen=True)
class RewardConfig:
    kind: str
    outcome_weight: float
    process_weight: float = 0.0
    behavior_weight: float = 0.0
    format_weight: float = 0.0
    tool_bonus: float = 0.0
    tool_penalty: float = 0.0


CONFIGS: dict[str, RewardConfig] = {
    "decomposed": RewardConfig(
        kind="decomposed",
        outcome_weight=0.7,
        process_weight=0.3,
        behavior_weight=2.0 / 3.0,
        format_weight=1.0 / 3.0,
    ),
    "conf": RewardConfig(
        kind="conf",
        outcome_weight=0.9,
        format_weight=0.1,
        tool_penalty=0.1,
    ),
    "no_behavior": RewardConfig(
        kind="no_behavior",
        outcome_weight=0.9,
        format_weight=0.1,
    ),
    "naive_behavior": RewardConfig(
        kind="naive_behavior",
        outcome_weight=0.7,
        tool_bonus=0.2,
        format_weight=0.1,
    ),
    "higher_behavior": RewardConfig(
        kind="higher_behavior",
        outcome_weight=0.6,
        behavior_weight=0.3,
        format_weight=0.1,
    ),
}

CONFIG_NAMES = tuple(CONFIGS)


def get_config(name: str) -> RewardConfig:
    try:
        return CONFIGS[name]
    except KeyError:
        raise ValueError(
            f"unknown reward config {name!r}; expected one of {', '.join(CONFIG_NAMES)}"
        ) from None


@dataclass
class RewardBreakdown:
    outcome: int
    behavior: int
    format: int
    tool_used: int
    composite: float
    config_kind: str

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "behavior": self.behavior,
            "format": self.format,
            "tool_used": self.tool_used,
            "composite": self.composite,
            "config_kind": self.config_kind,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RewardBreakdown":
        return cls(
            outcome=int(data["outcome"]),
            behavior=int(data["behavior"]),
            format=int(data["format"]),
            tool_used=int(data["tool_used"]),
            composite=float(data["composite"]),
            config_kind=str(data["config_kind"]),
        )


def behavior_reward(macro_action: str, metadata: str) -> int:
    """1 when the trajectory-level action matches the sample's tag."""
    if metadata not in METADATA_TAGS:
        raise ValueError(f"unknown metadata tag: {metadata!r}")
    tool_call = macro_action == MACRO_TOOL_CALL
    if tool_call and metadata == TOOL_REQUIRED:
        return 1
    if not tool_call and metadata == TOOL_FREE:
        return 1
    return 0


def format_reward(trace: ReActTrace, registry: dict[str, ToolSchema] | None = None) -> int:
    """1 iff every turn is well-formed, tool calls validate, and the trace
    terminates with exactly one answer."""
    registry = registry if registry is not None else default_registry()
    if trace.terminal != TERMINAL_ANSWERED or not trace.turns:
        return 0
    answers = 0
    for turn in trace.turns:
        if isinstance(turn.action, Malformed):
            return 0
        if isinstance(turn.action, ToolCallAction):
            if validate_tool_call(turn.action, registry):
                return 0
        elif isinstance(turn.action, AnswerAction):
            answers += 1
    if answers != 1 or not isinstance(trace.turns[-1].action, AnswerAction):
        return 0
    return 1


def compose(config: RewardConfig | str, outcome: int, behavior: int, format: int, tool_used: int) -> float:
    """Composite scalar for the named configuration."""
    cfg = get_config(config) if isinstance(config, str) else config
    for name, value in (
        ("outcome", outcome),
        ("behavior", behavior),
        ("format", format),
        ("tool_used", tool_used),
    ):
        if value not in (0, 1):
            raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    if cfg.kind == "decomposed":
        process = cfg.behavior_weight * behavior + cfg.format_weight * format
        return cfg.outcome_weight * outcome + cfg.process_weight * process
    if cfg.kind == "conf":
        return (
            cfg.outcome_weight * outcome * (1.0 - cfg.tool_penalty * tool_used)
            + cfg.format_weight * format
        )
    if cfg.kind == "no_behavior":
        return cfg.outcome_weight * outcome + cfg.format_weight * format
    if cfg.kind == "naive_behavior":
        return (
            cfg.outcome_weight * outcome
            + cfg.tool_bonus * tool_used
            + cfg.format_weight * format
        )
    if cfg.kind == "higher_behavior":
        return (
            cfg.outcome_weight * outcome
            + cfg.behavior_weight * behavior
            + cfg.format_weight * format
        )
    raise ValueError(f"unknown reward config kind: {cfg.kind!r}")


_NON_WORD_RE = re.compile(r"[^\w\s]", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    return _WS_RE.sub(" ", _NON_WORD_RE.sub(" ", text.lower())).strip()


class DeterministicJudge:
    """Model-free grading: normalized containment in either direction.

    Deliberately weaker than an LLM judge; useful for tests and offline runs.
    """

    def score(self, question: str, prediction: str, gold: str) -> int:
        del question
        pred = normalize_answer(prediction)
        answer = normalize_answer(gold)
        if not pred or not answer:
            return 0
        return int(answer in pred or pred in answer)


@dataclass
class JudgeVerdict:
    extracted_final_answer: str | None
    reasoning: str
    correct: str
    confidence: int


_EXTRACTED_RE = re.compile(r"^\s*extracted_final_answer\s*:\s*(.*)$", re.MULTILINE | re.IGNORECASE)
_REASONING_RE = re.compile(r"^\s*reasoning\s*:\s*(.*)$", re.MULTILINE | re.IGNORECASE)
_CORRECT_RE = re.compile(r"^\s*correct\s*:\s*(yes|no)\b", re.MULTILINE | re.IGNORECASE)
_CONFIDENCE_RE = re.compile(r"^\s*confidence\s*:\s*(\d{1,3})", re.MULTILINE | re.IGNORECASE)


def parse_judge_output(text: str) -> JudgeVerdict:
    """Extract the labeled verdict fields; unparseable means not correct."""
    extracted_match = _EXTRACTED_RE.search(text)
    extracted = extracted_match.group(1).strip() if extracted_match else None
    if extracted is not None and extracted.lower() in ("none", "'none'", '"none"', ""):
        extracted = None
    reasoning_match = _REASONING_RE.search(text)
    reasoning = reasoning_match.group(1).strip() if reasoning_match else ""
    correct_match = _CORRECT_RE.search(text)
    correct = correct_match.group(1).lower() if correct_match else "no"
    confidence_match = _CONFIDENCE_RE.search(text)
    confidence = int(confidence_match.group(1)) if confidence_match else 100
    confidence = max(0, min(100, confidence))
    return JudgeVerdict(
        extracted_final_answer=extracted,
        reasoning=reasoning,
        correct=correct,
        confidence=confidence,
    )


class LLMJudge:
    """Grades with an external completion client; verdict text is parsed strictly."""

    def __init__(self, client, retries: int = 3):
        self._client = client
        self.retries = retries

    def _complete(self, prompt: str) -> str:
        if callable(self._client):
            return self._client(prompt)
        return self._client.complete(prompt)

    def score(self, question: str, prediction: str, gold: str) -> int:
        prompt = render_judge_prompt(question, prediction, gold)
        last_exc: Exception | None = None
        for _ in range(self.retries):
            try:
                text = self._complete(prompt)
                break
            except JudgeTransportError as exc:
                last_exc = exc
        else:
            raise ScoringError(
                f"judge unavailable after {self.retries} attempts"
            ) from last_exc
        return int(parse_judge_output(text).correct == "yes")


def outcome_reward(question: str, prediction: str, gold: str, judge) -> int:
    """Binary correctness of the final answer; empty predictions never score."""
    if not prediction.strip():
        return 0
    return int(judge.score(question, prediction, gold))


def score_trace(
    trace: ReActTrace,
    question: str,
    gold: str,
    metadata: str | None,
    config: RewardConfig | str,
    judge,
    registry: dict[str, ToolSchema] | None = None,
) -> RewardBreakdown:
    """Full breakdown for one trajectory.

    When the sample carries no behavioral tag and the configuration needs one,
    scoring falls back to the no_behavior weights and logs a warning.
    """
    cfg = get_config(config) if isinstance(config, str) else config
    macro = classify_macro_action(trace)
    tool_used = int(macro == MACRO_TOOL_CALL)
    fmt = format_reward(trace, registry)
    outcome = outcome_reward(question, final_answer_text(trace), gold, judge)
    if metadata is None:
        behavior = 0
        if cfg.kind in ("decomposed", "higher_behavior"):
            logger.warning(
                "sample has no behavioral tag; scoring with no_behavior weights"
            )
            cfg = get_config("no_behavior")
    else:
        behavior = behavior_reward(macro, metadata)
    composite = compose(cfg, outcome, behavior, fmt, tool_used)
    return RewardBreakdown(
        outcome=outcome,
        behavior=behavior,
        format=fmt,
        tool_used=tool_used,
        composite=composite,
        config_kind=cfg.kind,
    )
