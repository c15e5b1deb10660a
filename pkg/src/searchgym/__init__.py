"""Deterministic retrieval sandbox and reward engine for search agents."""

from .corpus import (
    Chunk,
    RawPage,
    build_corpus,
    chunk_text,
    clean_markup,
    dedup,
    filter_page,
    inject_context,
    read_corpus,
)
from .embeddings import (
    EmbedderSpec,
    ReferenceEmbedder,
    embed,
    format_text,
    mean_pool,
)
from .flat_index import FlatIndex, build_index
from .metadata import VQASample, ingest_dataset, probe_sample, tag_dataset
from .orchestrator import (
    EpisodeLimits,
    EpisodeRecord,
    backend_swap_replay,
    run_batch,
    run_episode,
    score_episode,
)
from .rewards import (
    DeterministicJudge,
    LLMJudge,
    RewardBreakdown,
    RewardConfig,
    behavior_reward,
    compose,
    format_reward,
    get_config,
    outcome_reward,
    score_trace,
)
from .sandbox import ImageCache, ToolSandbox, precompute_image_cache
from .trace import (
    ReActTrace,
    ReActTurn,
    classify_macro_action,
    mask_spans,
    parse_turn,
    validate_tool_json,
)

__version__ = "0.1.0"
