"""Dataset ingestion and behavioral tagging by tool-free probing.

A sample is tagged tool_free when any of N independent direct-answer rollouts
is judged correct, tool_required when all fail. Probing never touches the
tool sandbox: the policy only ever sees the bare direct-answer prompt.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .policies import PolicyError
from .prompts import build_direct_prompt
from .rewards import (
    METADATA_TAGS,
    ScoringError,
    TOOL_FREE,
    TOOL_REQUIRED,
    outcome_reward,
)

DEFAULT_PROBE_ROLLOUTS = 8


class DatasetError(Exception):
    pass


@dataclass
class VQASample:
    sample_id: str
    question: str
    image_ref: str
    answer: str
    metadata: str | None = None
    search_type: str | None = None

    def to_json(self) -> dict:
        record = {
            "sample_id": self.sample_id,
            "question": self.question,
            "image_ref": self.image_ref,
            "answer": self.answer,
        }
        if self.metadata is not None:
            record["metadata"] = self.metadata
        if self.search_type is not None:
            record["search_type"] = self.search_type
        return record

    @classmethod
    def from_json(cls, data: dict) -> "VQASample":
        return cls(
            sample_id=str(data["sample_id"]),
            question=str(data["question"]),
            image_ref=str(data.get("image_ref", "")),
            answer=str(data["answer"]),
            metadata=data.get("metadata"),
            search_type=data.get("search_type"),
        )


@dataclass
class ProbeReport:
    sample_id: str
    rollout_outcomes: list[int]
    assigned_tag: str | None
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.error is None


def ingest_dataset(path: str | Path) -> tuple[list[VQASample], dict]:
    """Load and validate a line-delimited dataset; fatal on the first bad record."""
    samples: list[VQASample] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for index, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"record {index}: invalid JSON: {exc}") from exc
            try:
                sample = VQASample.from_json(record)
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"record {index}: missing field {exc}") from exc
            if not sample.sample_id:
                raise DatasetError(f"record {index}: empty sample_id")
            if sample.sample_id in seen_ids:
                raise DatasetError(
                    f"record {index}: duplicate sample_id '{sample.sample_id}'"
                )
            if not sample.question.strip():
                raise DatasetError(f"record {index}: empty question")
            if not sample.answer.strip():
                raise DatasetError(f"record {index}: empty answer")
            if sample.metadata is not None and sample.metadata not in METADATA_TAGS:
                raise DatasetError(
                    f"record {index}: unknown metadata tag '{sample.metadata}'"
                )
            seen_ids.add(sample.sample_id)
            samples.append(sample)
    return samples, dataset_stats(samples)


def dataset_stats(samples: list[VQASample]) -> dict:
    tagged = [s for s in samples if s.metadata is not None]
    stats: dict = {"count": len(samples), "tagged": len(tagged)}
    if tagged:
        stats["tool_free_ratio"] = sum(
            1 for s in tagged if s.metadata == TOOL_FREE
        ) / len(tagged)
    return stats


def write_dataset(samples: list[VQASample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for sample in samples:
            out.write(json.dumps(sample.to_json(), ensure_ascii=False, separators=(",", ":")))
            out.write("\n")


def rollout_seed(sample_id: str, index: int) -> int:
    digest = hashlib.blake2b(
        f"{sample_id}:{index}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


_ANSWER_TAG_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


def _prediction_from(text: str) -> str:
    match = _ANSWER_TAG_RE.search(text)
    return match.group(1).strip() if match else text.strip()


def tag_from_outcomes(outcomes: list[int]) -> str:
    return TOOL_FREE if any(outcomes) else TOOL_REQUIRED


def probe_sample(sample: VQASample, policy, judge, n: int = DEFAULT_PROBE_ROLLOUTS) -> ProbeReport:
    """Run n direct-answer rollouts; any judged-correct rollout means tool_free."""
    prompt = build_direct_prompt(sample.question, sample.image_ref)
    outcomes: list[int] = []
    for index in range(n):
        try:
            text = policy.generate(
                None,
                [{"role": "user", "content": prompt}],
                seed=rollout_seed(sample.sample_id, index),
            )
            outcomes.append(
                outcome_reward(sample.question, _prediction_from(text), sample.answer, judge)
            )
        except (PolicyError, ScoringError) as exc:
            return ProbeReport(sample.sample_id, outcomes, None, error=str(exc))
    return ProbeReport(sample.sample_id, outcomes, tag_from_outcomes(outcomes))


def tag_dataset(
    samples: list[VQASample], policy, judge, n: int = DEFAULT_PROBE_ROLLOUTS
) -> tuple[list[VQASample], dict]:
    """Probe every sample; incomplete probes are reported, never defaulted."""
    tagged: list[VQASample] = []
    incomplete: list[str] = []
    for sample in samples:
        report = probe_sample(sample, policy, judge, n)
        if not report.complete:
            incomplete.append(sample.sample_id)
            tagged.append(sample)
            continue
        tagged.append(
            VQASample(
                sample_id=sample.sample_id,
                question=sample.question,
                image_ref=sample.image_ref,
                answer=sample.answer,
                metadata=report.assigned_tag,
                search_type=sample.search_type,
            )
        )
    complete = [s for s in tagged if s.sample_id not in set(incomplete)]
    summary = dataset_stats(complete)
    summary["incomplete"] = incomplete
    return tagged, summary
