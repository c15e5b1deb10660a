"""Policy clients: the agent model is external; scripted policies drive tests.

A policy sees (system_prompt, conversation so far) and returns one assistant
turn. Scripted policies recover the question from the system prompt and can be
bound to a dataset so they know gold answers and behavioral tags.
"""

from __future__ import annotations

import json
import re
from typing import Protocol

import httpx

from .tooldefs import IMAGE_TOOL_NAME, SEARCH_TOOL_NAME


class PolicyError(Exception):
    """Transport or protocol failure talking to a policy."""


class PolicyClient(Protocol):
    def generate(self, system_prompt, messages, seed=None) -> str: ...


_QUESTION_RE = re.compile(r"^Question: (.*)$", re.MULTILINE)


def question_from_prompt(system_prompt: str | None) -> str | None:
    if not system_prompt:
        return None
    match = _QUESTION_RE.search(system_prompt)
    return match.group(1).strip() if match else None


def find_question(system_prompt: str | None, messages) -> str | None:
    """Locate the question line in the system prompt or any user message."""
    question = question_from_prompt(system_prompt)
    if question:
        return question
    for message in messages:
        if message.get("role") == "user":
            question = question_from_prompt(message.get("content", ""))
            if question:
                return question
    return None


def tool_call_text(name: str, arguments: dict, think: str = "I need more information.") -> str:
    payload = json.dumps({"name": name, "arguments": arguments}, ensure_ascii=False)
    return f"<think>{think}</think><tool_call>{payload}</tool_call>"


def answer_text(answer: str, think: str = "I have enough information to answer.") -> str:
    return f"<think>{think}</think><answer>{answer}</answer>"


def _assistant_turns(messages) -> int:
    return sum(1 for m in messages if m.get("role") == "assistant")


class AlwaysAnswer:
    """Answers immediately; gives the gold answer when bound to a dataset."""

    def __init__(self, answers: dict[str, str] | None = None, fallback: str = "I am not sure."):
        self.answers = answers or {}
        self.fallback = fallback

    def generate(self, system_prompt, messages, seed=None) -> str:
        question = find_question(system_prompt, messages)
        answer = self.answers.get(question, self.fallback)
        return answer_text(answer, think="I can answer this directly.")


class AlwaysSearch:
    """Calls the text search tool on every turn and never answers."""

    def generate(self, system_prompt, messages, seed=None) -> str:
        question = find_question(system_prompt, messages) or "more information"
        return tool_call_text(SEARCH_TOOL_NAME, {"query_list": [question]})


class OracleAligned:
    """Uses a tool exactly when the sample is tagged tool_required, then answers gold."""

    def __init__(self, samples_by_question: dict):
        self.samples = samples_by_question

    def generate(self, system_prompt, messages, seed=None) -> str:
        question = find_question(system_prompt, messages)
        sample = self.samples.get(question)
        if sample is None:
            return answer_text("unknown question")
        needs_tool = sample.metadata == "tool_required"
        if needs_tool and _assistant_turns(messages) == 0:
            return tool_call_text(SEARCH_TOOL_NAME, {"query_list": [sample.question]})
        return answer_text(sample.answer)


class ImageThenSearchThenAnswer:
    """Image search, then text search, then the final answer (three turns)."""

    def __init__(self, samples_by_question: dict | None = None, fallback: str = "I am not sure."):
        self.samples = samples_by_question or {}
        self.fallback = fallback

    def generate(self, system_prompt, messages, seed=None) -> str:
        question = find_question(system_prompt, messages)
        turn = _assistant_turns(messages)
        if turn == 0:
            return tool_call_text(
                IMAGE_TOOL_NAME, {}, think="I should identify the image first."
            )
        if turn == 1:
            query = question or "more information"
            return tool_call_text(SEARCH_TOOL_NAME, {"query_list": [query]})
        sample = self.samples.get(question)
        answer = sample.answer if sample is not None else self.fallback
        return answer_text(answer)


class ExternalPolicy:
    """HTTP policy: POST {system_prompt, messages, seed} -> {"text": ...}."""

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 3):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def generate(self, system_prompt, messages, seed=None) -> str:
        payload = {"system_prompt": system_prompt, "messages": messages, "seed": seed}
        last_exc: Exception | None = None
        for _ in range(self.retries):
            try:
                response = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
                response.raise_for_status()
                return str(response.json()["text"])
            except (httpx.HTTPError, ValueError, KeyError) as exc:
                last_exc = exc
        raise PolicyError(
            f"policy at {self.endpoint} unavailable after {self.retries} attempts"
        ) from last_exc


_SCRIPTED = {
    "always_answer": AlwaysAnswer,
    "always_search": AlwaysSearch,
    "oracle_aligned": OracleAligned,
    "image_then_search_then_answer": ImageThenSearchThenAnswer,
}


def _normalize_name(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower().replace("-", "_")


def make_policy(spec: str, samples=None):
    """Build a policy from a CLI spec: "scripted:NAME" or an HTTP endpoint."""
    if spec.startswith("scripted:"):
        name = _normalize_name(spec.split(":", 1)[1])
        if name not in _SCRIPTED:
            raise ValueError(
                f"unknown scripted policy {name!r}; expected one of {', '.join(_SCRIPTED)}"
            )
        by_question = {s.question: s for s in samples} if samples else {}
        if name == "always_answer":
            return AlwaysAnswer({q: s.answer for q, s in by_question.items()})
        if name == "always_search":
            return AlwaysSearch()
        if name == "oracle_aligned":
            return OracleAligned(by_question)
        return ImageThenSearchThenAnswer(by_question)
    if spec.startswith("http://") or spec.startswith("https://"):
        return ExternalPolicy(spec)
    raise ValueError(f"policy spec must be 'scripted:NAME' or an http(s) endpoint: {spec!r}")
