"""Episode loop between a policy and the sandbox, batch runs, and replay.

An episode alternates assistant turns with tool observations until the policy
answers or the turn limit is hit. Malformed assistant output is answered with
a fixed notice (it still costs a turn) so the policy can observe its own
format failures. Replay re-executes recorded query lists against the other
text-search backend to compare retrieval, without touching the original
record.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .metadata import VQASample
from .policies import PolicyError
from .prompts import build_system_prompt
from .rewards import RewardBreakdown, RewardConfig, score_trace
from .sandbox import ToolSandbox
from .tooldefs import IMAGE_TOOL_NAME, SEARCH_TOOL_NAME
from .trace import (
    AnswerAction,
    MACRO_TOOL_CALL,
    ReActTrace,
    TERMINAL_ANSWERED,
    TERMINAL_TRUNCATED,
    ToolCallAction,
    classify_macro_action,
    mask_spans,
    parse_turn,
    trace_from_json,
    trace_to_json,
)

logger = logging.getLogger(__name__)

MALFORMED_NOTICE = "Error: output did not follow the required format."

DEFAULT_MAX_ASSISTANT_TURNS = 10
DEFAULT_MAX_TOOL_RESPONSE_CHARS = 4096
DEFAULT_MAX_PROMPT_CHARS = 8192
DEFAULT_MAX_RESPONSE_CHARS = 16384


class EpisodeAborted(Exception):
    def __init__(self, sample_id: str, reason: str):
        super().__init__(f"episode for {sample_id!r} aborted: {reason}")
        self.sample_id = sample_id
        self.reason = reason


@dataclass(frozen=True)
class EpisodeLimits:
    max_assistant_turns: int = DEFAULT_MAX_ASSISTANT_TURNS
    max_tool_response_chars: int = DEFAULT_MAX_TOOL_RESPONSE_CHARS
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS
    max_response_chars: int = DEFAULT_MAX_RESPONSE_CHARS

    def __post_init__(self):
        for name in (
            "max_assistant_turns",
            "max_tool_response_chars",
            "max_prompt_chars",
            "max_response_chars",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_json(self) -> dict:
        return {
            "max_assistant_turns": self.max_assistant_turns,
            "max_tool_response_chars": self.max_tool_response_chars,
            "max_prompt_chars": self.max_prompt_chars,
            "max_response_chars": self.max_response_chars,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeLimits":
        return cls(**{k: int(v) for k, v in data.items()})


def load_limits(path: str | Path) -> EpisodeLimits:
    with open(path, "r", encoding="utf-8") as handle:
        return EpisodeLimits.from_json(json.load(handle))


@dataclass
class EpisodeRecord:
    sample_id: str
    trace: ReActTrace
    mask: list[tuple[int, int]]
    reward: RewardBreakdown | None
    tool_calls: list[dict]
    terminal: str

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "trace": trace_to_json(self.trace),
            "mask": [list(span) for span in self.mask],
            "reward": self.reward.to_json() if self.reward else None,
            "tool_calls": self.tool_calls,
            "terminal": self.terminal,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeRecord":
        return cls(
            sample_id=str(data["sample_id"]),
            trace=trace_from_json(data["trace"]),
            mask=[tuple(span) for span in data.get("mask", [])],
            reward=RewardBreakdown.from_json(data["reward"]) if data.get("reward") else None,
            tool_calls=list(data.get("tool_calls", [])),
            terminal=str(data["terminal"]),
        )


def episode_seed(sample_id: str, run_id: str) -> int:
    digest = hashlib.blake2b(
        f"{sample_id}:{run_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def run_episode(
    sample: VQASample,
    policy,
    sandbox: ToolSandbox,
    limits: EpisodeLimits | None = None,
    run_id: str = "run-0",
) -> EpisodeRecord:
    """Drive one ReAct episode to answer or truncation."""
    limits = limits or EpisodeLimits()
    system_prompt = build_system_prompt(sample.question, sample.image_ref, sandbox.registry)
    episode_id = sandbox.create_episode(sample.sample_id)
    seed = episode_seed(sample.sample_id, run_id)
    messages: list[dict] = []
    turns = []
    observations: list[str] = []
    tool_calls: list[dict] = []
    terminal = TERMINAL_TRUNCATED
    try:
        for turn_index in range(limits.max_assistant_turns):
            try:
                text = policy.generate(system_prompt, messages, seed=seed)
            except PolicyError as exc:
                raise EpisodeAborted(sample.sample_id, str(exc)) from exc
            text = text[: limits.max_response_chars]
            turn = parse_turn(text)
            turns.append(turn)
            messages.append({"role": "assistant", "content": text})
            if isinstance(turn.action, ToolCallAction):
                result = sandbox.execute(episode_id, turn.action.name, turn.action.arguments)
                observation = result.observation[: limits.max_tool_response_chars]
                observations.append(observation)
                tool_calls.append(
                    {
                        "turn": turn_index,
                        "name": turn.action.name,
                        "arguments": turn.action.arguments,
                    }
                )
                messages.append({"role": "user", "content": observation})
            elif isinstance(turn.action, AnswerAction):
                terminal = TERMINAL_ANSWERED
                break
            else:
                messages.append({"role": "user", "content": MALFORMED_NOTICE})
    finally:
        sandbox.close_episode(episode_id)
    trace = ReActTrace(turns=turns, observations=observations, terminal=terminal)
    return EpisodeRecord(
        sample_id=sample.sample_id,
        trace=trace,
        mask=mask_spans(trace),
        reward=None,
        tool_calls=tool_calls,
        terminal=terminal,
    )


def score_episode(
    record: EpisodeRecord,
    sample: VQASample,
    config: RewardConfig | str,
    judge,
    registry=None,
) -> EpisodeRecord:
    record.reward = score_trace(
        record.trace,
        question=sample.question,
        gold=sample.answer,
        metadata=sample.metadata,
        config=config,
        judge=judge,
        registry=registry,
    )
    return record


def run_batch(
    samples: list[VQASample],
    policy,
    sandbox: ToolSandbox,
    limits: EpisodeLimits | None,
    config: RewardConfig | str,
    judge,
    out_path: str | Path,
    run_id: str = "run-0",
    concurrency: int = 1,
) -> dict:
    """Run and score one episode per sample; write records, return metrics.

    Episodes may run concurrently up to `concurrency`; records are written in
    dataset order either way, so the output file does not depend on
    scheduling. Per-episode failures are counted and reported but excluded
    from accuracy and the tool-call ratio.
    """

    def run_one(sample: VQASample) -> EpisodeRecord:
        record = run_episode(sample, policy, sandbox, limits, run_id=run_id)
        return score_episode(record, sample, config, judge, registry=sandbox.registry)

    episodes = 0
    failures: list[dict] = []
    outcome_total = 0
    tool_call_total = 0
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        if concurrency <= 1:
            outcomes = map(lambda s: _caught(run_one, s), samples)
        else:
            pool = ThreadPoolExecutor(max_workers=concurrency)
            outcomes = pool.map(lambda s: _caught(run_one, s), samples)
        for result in outcomes:
            if isinstance(result, EpisodeAborted):
                logger.warning("episode aborted: %s", result)
                failures.append({"sample_id": result.sample_id, "reason": result.reason})
                continue
            record = result
            episodes += 1
            outcome_total += record.reward.outcome
            tool_call_total += int(classify_macro_action(record.trace) == MACRO_TOOL_CALL)
            out.write(json.dumps(record.to_json(), ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
        if concurrency > 1:
            pool.shutdown()
    metrics = {
        "episodes": episodes,
        "errors": len(failures),
        "failed_samples": failures,
        "accuracy": outcome_total / episodes if episodes else 0.0,
        "tool_call_ratio": tool_call_total / episodes if episodes else 0.0,
    }
    return metrics


def _caught(fn, sample):
    try:
        return fn(sample)
    except EpisodeAborted as exc:
        return exc


def read_episodes(path: str | Path) -> list[EpisodeRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(EpisodeRecord.from_json(json.loads(line)))
    return records


def backend_swap_replay(
    record: EpisodeRecord,
    alt_text_search,
    policy=None,
    sample: VQASample | None = None,
    limits: EpisodeLimits | None = None,
) -> dict:
    """Re-run the recorded query lists against the other text-search backend.

    Query strings are replayed verbatim; image-search observations come from
    the immutable cache, i.e. unchanged. When a policy is supplied, it is
    asked for one final turn over the conversation rebuilt with the replayed
    observations.
    """
    limits = limits or EpisodeLimits()
    calls = []
    changed = 0
    failures = 0
    replayed_observations: list[str] = []
    obs_index = 0
    for call in record.tool_calls:
        original = record.trace.observations[obs_index]
        obs_index += 1
        entry = {
            "turn": call["turn"],
            "name": call["name"],
            "original_observation": original,
        }
        if call["name"] == SEARCH_TOOL_NAME:
            queries = list(call["arguments"].get("query_list", []))
            entry["queries"] = queries
            try:
                replayed = alt_text_search.observation(queries)[
                    : limits.max_tool_response_chars
                ]
                entry["replayed_observation"] = replayed
                entry["changed"] = replayed != original
                changed += int(entry["changed"])
            except Exception as exc:  # backend down: keep going, report it
                failures += 1
                entry["error"] = str(exc)
                entry["replayed_observation"] = None
                entry["changed"] = None
                replayed = original
        else:
            entry["replayed_observation"] = original
            entry["changed"] = False
            replayed = original
        replayed_observations.append(replayed)
        calls.append(entry)
    report = {
        "sample_id": record.sample_id,
        "calls": calls,
        "summary": {
            "text_calls": sum(1 for c in record.tool_calls if c["name"] == SEARCH_TOOL_NAME),
            "image_calls": sum(1 for c in record.tool_calls if c["name"] == IMAGE_TOOL_NAME),
            "changed": changed,
            "failures": failures,
        },
    }
    if policy is not None:
        report["replayed_answer"] = _replay_final_answer(
            record, replayed_observations, policy, sample, limits
        )
    return report


def _replay_final_answer(
    record: EpisodeRecord,
    replayed_observations: list[str],
    policy,
    sample: VQASample | None,
    limits: EpisodeLimits,
) -> str | None:
    messages: list[dict] = []
    obs_iter = iter(replayed_observations)
    for turn in record.trace.turns:
        if isinstance(turn.action, AnswerAction):
            break
        messages.append({"role": "assistant", "content": turn.raw})
        if isinstance(turn.action, ToolCallAction):
            messages.append({"role": "user", "content": next(obs_iter)})
        else:
            messages.append({"role": "user", "content": MALFORMED_NOTICE})
    system_prompt = (
        build_system_prompt(sample.question, sample.image_ref) if sample else None
    )
    try:
        text = policy.generate(system_prompt, messages, seed=None)
    except PolicyError:
        return None
    turn = parse_turn(text[: limits.max_response_chars])
    if isinstance(turn.action, AnswerAction):
        return turn.action.answer
    return None
