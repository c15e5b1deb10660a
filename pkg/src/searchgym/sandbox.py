"""Tool sandbox: text search (local index or cached web) and a once-per-episode
image lookup, behind a single dispatch with schema validation.

Everything an agent observes comes back as plain text, capped at the tool
response limit. Failures surface as error observations so an episode can
continue; only cache storage failures are fatal.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Chunk
from .embeddings import ROLE_QUERY
from .flat_index import FlatIndex
from .kvstore import CacheStorageError
from .tooldefs import SEARCH_TOOL_NAME, ToolSchema, default_registry
from .trace import validate_tool_json
from .webclients import WebResult, WebSearchError

TOOL_RESPONSE_LIMIT = 4096
LOCAL_TOP_K = 3
WEB_TOP_K = 5
IMAGE_TOP_K = 3
IMAGE_CACHE_DEPTH = 10
MAX_QUERIES_PER_CALL = 5

MODE_LOCAL = "local"
MODE_WEB = "web"

ERR_NO_QUERIES = "no queries provided"
ERR_SEARCH_UNAVAILABLE = "search unavailable"
ERR_IMAGE_ONCE = "image search may only be called once"
ERR_NO_IMAGE_RESULTS = "no image results cached"
ERR_INVALID_ARGUMENTS = "invalid tool arguments"


class UnknownEpisodeError(KeyError):
    pass


@dataclass
class ToolResult:
    observation: str
    error: str | None = None


def _dedup_queries(query_list: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for query in query_list:
        if query not in seen:
            seen.add(query)
            out.append(query)
    return out[:MAX_QUERIES_PER_CALL]


class LocalTextSearch:
    """Top-k retrieval over the local corpus index."""

    def __init__(
        self,
        embedder,
        index: FlatIndex,
        chunks: list[Chunk],
        k: int = LOCAL_TOP_K,
    ):
        self.embedder = embedder
        self.index = index
        self.chunks_by_id = {chunk.chunk_id: chunk for chunk in chunks}
        self.k = k

    def observation(self, query_list: list[str]) -> str:
        blocks = []
        for query in query_list:
            vector = self.embedder.embed(query, ROLE_QUERY)
            hits = self.index.search(vector, self.k)
            lines = [f"Query: {query}"]
            for rank, (chunk_id, _score) in enumerate(hits, 1):
                chunk = self.chunks_by_id.get(chunk_id)
                text = chunk.text if chunk else ""
                lines.append(f"Doc {rank}: {text}")
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)


class WebTextSearch:
    """Cached web search: byte-equal query keys replay the stored response."""

    def __init__(self, client, cache, k: int = WEB_TOP_K):
        self.client = client
        self.cache = cache
        self.k = k

    def _results_for(self, query: str) -> list[WebResult]:
        cached = self.cache.get(query)
        if cached is not None:
            return [WebResult.from_json(item) for item in json.loads(cached.decode("utf-8"))]
        results = self.client.search(query)
        payload = json.dumps(
            [r.to_json() for r in results], ensure_ascii=False, separators=(",", ":")
        ).encode("utf-8")
        self.cache.put(query, payload)
        return results

    def observation(self, query_list: list[str]) -> str:
        blocks = []
        for query in query_list:
            try:
                results = self._results_for(query)
            except CacheStorageError:
                raise
            except (WebSearchError, OSError) as exc:
                raise WebSearchError(str(exc)) from exc
            lines = [f"Query: {query}"]
            for rank, result in enumerate(results[: self.k], 1):
                lines.append(f"{rank}. {result.title} | {result.link}")
                lines.append(result.snippet)
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)


class ImageCache:
    """Per-sample precomputed image results, keyed by sample id."""

    def __init__(self, entries: dict[str, list[tuple[str, str]]] | None = None):
        self.entries = {k: [tuple(p) for p in v] for k, v in (entries or {}).items()}

    def get(self, sample_id: str) -> list[tuple[str, str]] | None:
        results = self.entries.get(sample_id)
        return list(results) if results is not None else None

    def put(self, sample_id: str, results: list[tuple[str, str]]) -> None:
        self.entries[sample_id] = [tuple(p) for p in results[:IMAGE_CACHE_DEPTH]]

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.entries

    def save(self, path: str | Path) -> None:
        payload = {k: [list(p) for p in v] for k, v in sorted(self.entries.items())}
        with open(path, "w", encoding="utf-8", newline="\n") as out:
            json.dump(payload, out, ensure_ascii=False, indent=2, sort_keys=True)
            out.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ImageCache":
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        return cls({k: [tuple(p) for p in v] for k, v in payload.items()})


def precompute_image_cache(samples, image_client, out_path: str | Path) -> dict:
    """Fetch and store up to IMAGE_CACHE_DEPTH results per sample.

    Re-runs skip sample ids already present, so the cache is append-only and
    upstream is queried at most once per sample.
    """
    out_path = Path(out_path)
    cache = ImageCache.load(out_path) if out_path.exists() else ImageCache()
    fetched = 0
    skipped = 0
    failures: list[str] = []
    for sample in samples:
        sample_id = sample.sample_id
        if sample_id in cache:
            skipped += 1
            continue
        try:
            results = image_client.search_by_image(sample.image_ref)
        except WebSearchError:
            failures.append(sample_id)
            continue
        cache.put(sample_id, results)
        fetched += 1
    cache.save(out_path)
    return {
        "entries": len(cache.entries),
        "fetched": fetched,
        "skipped": skipped,
        "failures": failures,
    }


@dataclass
class EpisodeToolState:
    episode_id: str
    sample_id: str | None
    image_tool_used: bool = False
    call_log: list[tuple[str, str, float]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ToolSandbox:
    """Dispatches validated tool calls for many concurrent episodes."""

    def __init__(
        self,
        mode: str,
        text_search,
        image_cache: ImageCache | None = None,
        registry: dict[str, ToolSchema] | None = None,
        response_limit: int = TOOL_RESPONSE_LIMIT,
        image_top_k: int = IMAGE_TOP_K,
    ):
        if mode not in (MODE_LOCAL, MODE_WEB):
            raise ValueError(f"unknown sandbox mode: {mode!r}")
        self.mode = mode
        self.text_search = text_search
        self.image_cache = image_cache if image_cache is not None else ImageCache()
        self.registry = registry if registry is not None else default_registry()
        self.response_limit = response_limit
        self.image_top_k = image_top_k
        self._episodes: dict[str, EpisodeToolState] = {}
        self._episodes_lock = threading.Lock()

    def create_episode(self, sample_id: str | None = None) -> str:
        episode_id = uuid.uuid4().hex
        with self._episodes_lock:
            self._episodes[episode_id] = EpisodeToolState(episode_id, sample_id)
        return episode_id

    def close_episode(self, episode_id: str) -> None:
        with self._episodes_lock:
            self._episodes.pop(episode_id, None)

    def _state(self, episode_id: str) -> EpisodeToolState:
        with self._episodes_lock:
            try:
                return self._episodes[episode_id]
            except KeyError:
                raise UnknownEpisodeError(episode_id) from None

    def execute(self, episode_id: str, name: str, arguments) -> ToolResult:
        """Validate, dispatch, log, truncate. Errors become observations."""
        state = self._state(episode_id)
        result = self._dispatch(state, name, arguments)
        result.observation = result.observation[: self.response_limit]
        digest = hashlib.md5(
            json.dumps(arguments, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest()
        with state.lock:
            state.call_log.append((name, digest, time.time()))
        return result

    def _dispatch(self, state: EpisodeToolState, name: str, arguments) -> ToolResult:
        if name not in self.registry:
            return ToolResult(f"unknown tool: {name}", error="unknown_tool")
        if isinstance(arguments, str):
            try:
                arguments = json.loads(arguments)
            except json.JSONDecodeError:
                return ToolResult(ERR_INVALID_ARGUMENTS, error="invalid_arguments")
        if arguments is None:
            arguments = {}
        if not isinstance(arguments, dict):
            return ToolResult(ERR_INVALID_ARGUMENTS, error="invalid_arguments")
        violations = validate_tool_json({"name": name, "arguments": arguments}, self.registry)
        if violations:
            detail = "; ".join(violations)
            return ToolResult(f"{ERR_INVALID_ARGUMENTS}: {detail}", error="invalid_arguments")
        if name == SEARCH_TOOL_NAME:
            return self._run_text_search(arguments["query_list"])
        return self._run_image_search(state)

    def _run_text_search(self, query_list: list[str]) -> ToolResult:
        queries = _dedup_queries([q for q in query_list if isinstance(q, str)])
        if not queries:
            return ToolResult(ERR_NO_QUERIES, error="no_queries")
        try:
            return ToolResult(self.text_search.observation(queries))
        except WebSearchError:
            return ToolResult(ERR_SEARCH_UNAVAILABLE, error="unavailable")

    def _run_image_search(self, state: EpisodeToolState) -> ToolResult:
        with state.lock:
            if state.image_tool_used:
                return ToolResult(ERR_IMAGE_ONCE, error="once_only")
            entries = (
                self.image_cache.get(state.sample_id) if state.sample_id is not None else None
            )
            if not entries:
                return ToolResult(ERR_NO_IMAGE_RESULTS, error="no_image_results")
            state.image_tool_used = True
        lines = ["Image search results:"]
        for rank, (image_ref, page_title) in enumerate(entries[: self.image_top_k], 1):
            lines.append(f"{rank}. {image_ref} | {page_title}")
        return ToolResult("\n".join(lines))
