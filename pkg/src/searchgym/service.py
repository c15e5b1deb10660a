"""HTTP surface for the sandbox: episode lifecycle, tool dispatch, scoring.

Tool failures that an agent should observe come back as 200 responses with an
error code next to the observation; only protocol-level problems (unknown
episode, malformed body, bad config) map to HTTP errors. Error details carry
no episode ids so identical request sequences produce identical bodies.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .rewards import DeterministicJudge, ScoringError, get_config, score_trace
from .sandbox import ToolSandbox, UnknownEpisodeError
from .tooldefs import openai_tool_schemas
from .trace import TraceFormatError, trace_from_json


class EpisodeCreateRequest(BaseModel):
    sample_id: str | None = None


class ToolCallRequest(BaseModel):
    name: str
    arguments: Any = None


class ScoreRequest(BaseModel):
    trace: dict
    sample: dict
    config: str = "decomposed"


def create_app(sandbox: ToolSandbox, judge=None) -> FastAPI:
    judge = judge if judge is not None else DeterministicJudge()
    app = FastAPI(title="searchgym sandbox", version="0.1.0")

    @app.get("/health")
    def health():
        return {"status": "ok", "mode": sandbox.mode}

    @app.get("/schemas")
    def schemas():
        return openai_tool_schemas(sandbox.registry)

    @app.post("/episodes")
    def create_episode(request: EpisodeCreateRequest):
        return {"episode_id": sandbox.create_episode(request.sample_id)}

    @app.post("/episodes/{episode_id}/tool")
    def call_tool(episode_id: str, request: ToolCallRequest):
        try:
            result = sandbox.execute(episode_id, request.name, request.arguments)
        except UnknownEpisodeError:
            raise HTTPException(status_code=404, detail="unknown episode")
        return {"observation": result.observation, "error": result.error}

    @app.delete("/episodes/{episode_id}")
    def delete_episode(episode_id: str):
        sandbox.close_episode(episode_id)
        return {"deleted": True}

    @app.post("/score")
    def score(request: ScoreRequest):
        try:
            config = get_config(request.config)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            trace = trace_from_json(request.trace)
        except TraceFormatError as exc:
            raise HTTPException(status_code=400, detail=f"bad trace: {exc}")
        sample = request.sample
        question = str(sample.get("question", ""))
        gold = str(sample.get("answer", ""))
        metadata = sample.get("metadata")
        try:
            breakdown = score_trace(
                trace,
                question=question,
                gold=gold,
                metadata=metadata,
                config=config,
                judge=judge,
                registry=sandbox.registry,
            )
        except ScoringError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return breakdown.to_json()

    return app
