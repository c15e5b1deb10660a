"""Command-line entry points for the corpus, index, sandbox, and rollout tools."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .corpus import MAX_CHUNK_CHARS, MIN_CHUNK_CHARS, build_corpus, parse_dump, read_corpus
from .embeddings import EmbedderSpec, ROLE_QUERY, make_embedder
from .flat_index import FlatIndex, build_index
from .kvstore import MemoryKV, SqliteKV
from .metadata import ingest_dataset, tag_dataset, write_dataset
from .orchestrator import (
    EpisodeLimits,
    backend_swap_replay,
    load_limits,
    read_episodes,
    run_batch,
)
from .policies import make_policy
from .rewards import (
    CONFIG_NAMES,
    DeterministicJudge,
    LLMJudge,
    score_trace,
)
from .sandbox import (
    ImageCache,
    LocalTextSearch,
    MODE_LOCAL,
    MODE_WEB,
    ToolSandbox,
    WebTextSearch,
)
from .webclients import SerperWebClient


@click.group()
def main():
    """Deterministic retrieval sandbox and reward engine for search agents."""


@main.group()
def corpus():
    """Build and inspect retrieval corpora."""


@corpus.command("build")
@click.option("--dump", "dump_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-len", default=MIN_CHUNK_CHARS, show_default=True)
@click.option("--max-len", default=MAX_CHUNK_CHARS, show_default=True)
def corpus_build(dump_path, out_path, min_len, max_len):
    """Filter, clean, chunk, and dedup a dump into a corpus file."""
    stats = build_corpus(parse_dump(dump_path), out_path, min_len=min_len, max_len=max_len)
    click.echo(json.dumps(stats.to_json(), indent=2))


@main.group()
def index():
    """Build and query the flat retrieval index."""


def _embedder_spec(kind: str, dim: int, endpoint: str | None, max_tokens: int) -> EmbedderSpec:
    return EmbedderSpec(kind=kind, dim=dim, endpoint=endpoint, max_tokens=max_tokens)


@index.command("build")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--embedder", "kind", default="reference", type=click.Choice(["reference", "external"]))
@click.option("--dim", default=64, show_default=True)
@click.option("--endpoint", default=None, help="Encoder endpoint for --embedder external.")
@click.option("--max-tokens", default=180, show_default=True)
def index_build(corpus_path, out_path, kind, dim, endpoint, max_tokens):
    """Embed every chunk and persist the index."""
    embedder = make_embedder(_embedder_spec(kind, dim, endpoint, max_tokens))
    flat = build_index(corpus_path, embedder)
    flat.save(out_path)
    click.echo(f"indexed {flat.count} chunks (dim {flat.dim}) -> {out_path}")


@index.command("query")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--text", required=True)
@click.option("--k", default=5, show_default=True)
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True),
              help="Show chunk text alongside ids.")
@click.option("--embedder", "kind", default="reference", type=click.Choice(["reference", "external"]))
@click.option("--dim", default=64, show_default=True)
@click.option("--endpoint", default=None)
@click.option("--max-tokens", default=180, show_default=True)
def index_query(index_path, text, k, corpus_path, kind, dim, endpoint, max_tokens):
    """Top-k search for a query string."""
    flat = FlatIndex.load(index_path)
    embedder = make_embedder(_embedder_spec(kind, flat.dim if kind == "reference" else dim,
                                            endpoint, max_tokens))
    hits = flat.search(embedder.embed(text, ROLE_QUERY), k)
    chunks = {c.chunk_id: c for c in read_corpus(corpus_path)} if corpus_path else {}
    for rank, (chunk_id, score) in enumerate(hits, 1):
        line = f"{rank}. chunk {chunk_id}  score {score:.6f}"
        if chunk_id in chunks:
            line += f"  {chunks[chunk_id].text[:120]}"
        click.echo(line)


def _build_sandbox(mode, index_path, corpus_path, web_cache_path, image_cache_path,
                   serper_key=None, dim=64, max_tokens=180):
    image_cache = ImageCache.load(image_cache_path) if image_cache_path else ImageCache()
    if mode == MODE_LOCAL:
        if not index_path or not corpus_path:
            raise click.UsageError("--index and --corpus are required in local mode")
        embedder = make_embedder(EmbedderSpec(kind="reference", dim=dim, max_tokens=max_tokens))
        text_search = LocalTextSearch(embedder, FlatIndex.load(index_path), read_corpus(corpus_path))
    else:
        cache = SqliteKV(web_cache_path) if web_cache_path else MemoryKV()
        if serper_key:
            client = SerperWebClient(serper_key)
        else:
            client = _CacheOnlyClient()
        text_search = WebTextSearch(client, cache)
    return ToolSandbox(mode=mode, text_search=text_search, image_cache=image_cache)


class _CacheOnlyClient:
    """Web client used when no API key is configured: every miss fails."""

    def search(self, query):
        from .webclients import WebSearchError

        raise WebSearchError("no web search client configured")


@main.group()
def sandbox():
    """Serve the tool sandbox over HTTP."""


@sandbox.command("serve")
@click.option("--mode", default=MODE_LOCAL, type=click.Choice([MODE_LOCAL, MODE_WEB]))
@click.option("--index", "index_path", default=None, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True))
@click.option("--image-cache", "image_cache_path", default=None, type=click.Path(exists=True))
@click.option("--web-cache", "web_cache_path", default=None, type=click.Path())
@click.option("--serper-key", envvar="SERPER_API_KEY", default=None)
@click.option("--judge", "judge_kind", default="deterministic",
              type=click.Choice(["deterministic", "external"]))
@click.option("--judge-endpoint", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8810, show_default=True)
def sandbox_serve(mode, index_path, corpus_path, image_cache_path, web_cache_path,
                  serper_key, judge_kind, judge_endpoint, host, port):
    """Run the sandbox service (episodes, tools, scoring)."""
    import uvicorn

    from .service import create_app

    box = _build_sandbox(mode, index_path, corpus_path, web_cache_path,
                         image_cache_path, serper_key)
    judge = _make_judge(judge_kind, judge_endpoint)
    uvicorn.run(create_app(box, judge=judge), host=host, port=port, log_level="warning")


@sandbox.command("precompute-images")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--serper-key", envvar="SERPER_API_KEY", required=True)
def sandbox_precompute_images(dataset_path, out_path, serper_key):
    """Fetch and store the top image matches for every dataset sample."""
    from .sandbox import precompute_image_cache
    from .webclients import SerperImageClient

    samples, _ = ingest_dataset(dataset_path)
    summary = precompute_image_cache(samples, SerperImageClient(serper_key), out_path)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.group()
def metadata():
    """Generate behavioral metadata by tool-free probing."""


@metadata.command("tag")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rollouts", default=8, show_default=True)
@click.option("--policy", "policy_spec", required=True,
              help="scripted:NAME or an http(s) policy endpoint.")
@click.option("--judge", "judge_kind", default="deterministic",
              type=click.Choice(["deterministic", "external"]))
@click.option("--judge-endpoint", default=None)
def metadata_tag(dataset_path, out_path, rollouts, policy_spec, judge_kind, judge_endpoint):
    """Tag every sample tool_free / tool_required via direct-answer rollouts."""
    samples, _ = ingest_dataset(dataset_path)
    policy = make_policy(policy_spec, samples)
    judge = _make_judge(judge_kind, judge_endpoint)
    tagged, summary = tag_dataset(samples, policy, judge, n=rollouts)
    write_dataset(tagged, out_path)
    click.echo(json.dumps(summary, indent=2))


def _make_judge(kind: str, endpoint: str | None):
    if kind == "deterministic":
        return DeterministicJudge()
    if not endpoint:
        raise click.UsageError("--judge external requires --judge-endpoint")

    import httpx

    def complete(prompt: str) -> str:
        response = httpx.post(endpoint, json={"prompt": prompt}, timeout=60.0)
        response.raise_for_status()
        return response.json()["text"]

    return LLMJudge(complete)


@main.command("score")
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_name", default="decomposed",
              type=click.Choice(list(CONFIG_NAMES)))
@click.option("--judge", "judge_kind", default="deterministic",
              type=click.Choice(["deterministic", "external"]))
@click.option("--judge-endpoint", default=None)
@click.option("--out", "out_path", default=None, type=click.Path())
def score_cmd(traces_path, dataset_path, config_name, judge_kind, judge_endpoint, out_path):
    """Score recorded traces against a dataset under a reward configuration."""
    from .trace import trace_from_json

    samples, _ = ingest_dataset(dataset_path)
    by_id = {s.sample_id: s for s in samples}
    judge = _make_judge(judge_kind, judge_endpoint)
    results = []
    with open(traces_path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            sample_id = record.get("sample_id")
            if sample_id not in by_id:
                raise click.ClickException(f"line {lineno}: unknown sample_id {sample_id!r}")
            sample = by_id[sample_id]
            trace = trace_from_json(record["trace"] if "trace" in record else record)
            breakdown = score_trace(trace, sample.question, sample.answer,
                                    sample.metadata, config_name, judge)
            results.append({"sample_id": sample_id, **breakdown.to_json()})
    output = "\n".join(json.dumps(r, ensure_ascii=False) for r in results)
    if out_path:
        Path(out_path).write_text(output + "\n", encoding="utf-8")
    else:
        click.echo(output)
    n = len(results)
    if n:
        click.echo(
            f"scored {n} traces: accuracy {sum(r['outcome'] for r in results) / n:.3f}, "
            f"mean composite {sum(r['composite'] for r in results) / n:.3f}",
            err=True,
        )


@main.group()
def rollout():
    """Run episodes and replay them against the other search backend."""


@rollout.command("run")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_spec", required=True)
@click.option("--mode", default=MODE_LOCAL, type=click.Choice([MODE_LOCAL, MODE_WEB]))
@click.option("--config", "config_name", default="decomposed",
              type=click.Choice(list(CONFIG_NAMES)))
@click.option("--limits-file", default=None, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--index", "index_path", default=None, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True))
@click.option("--web-cache", "web_cache_path", default=None, type=click.Path())
@click.option("--image-cache", "image_cache_path", default=None, type=click.Path(exists=True))
@click.option("--judge", "judge_kind", default="deterministic",
              type=click.Choice(["deterministic", "external"]))
@click.option("--judge-endpoint", default=None)
@click.option("--run-id", default="run-0", show_default=True)
@click.option("--concurrency", default=1, show_default=True)
@click.option("--metrics-out", default=None, type=click.Path())
def rollout_run(dataset_path, policy_spec, mode, config_name, limits_file, out_path,
                index_path, corpus_path, web_cache_path, image_cache_path,
                judge_kind, judge_endpoint, run_id, concurrency, metrics_out):
    """Run one scored episode per dataset sample."""
    samples, _ = ingest_dataset(dataset_path)
    box = _build_sandbox(mode, index_path, corpus_path, web_cache_path, image_cache_path)
    policy = make_policy(policy_spec, samples)
    judge = _make_judge(judge_kind, judge_endpoint)
    limits = load_limits(limits_file) if limits_file else EpisodeLimits()
    metrics = run_batch(samples, policy, box, limits, config_name, judge, out_path,
                        run_id=run_id, concurrency=concurrency)
    payload = json.dumps(metrics, indent=2, sort_keys=True)
    if metrics_out:
        Path(metrics_out).write_text(payload + "\n", encoding="utf-8")
    click.echo(payload)


@rollout.command("swap")
@click.option("--episodes", "episodes_path", required=True, type=click.Path(exists=True))
@click.option("--alt-backend", required=True, type=click.Choice([MODE_LOCAL, MODE_WEB]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--index", "index_path", default=None, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True))
@click.option("--web-cache", "web_cache_path", default=None, type=click.Path())
def rollout_swap(episodes_path, alt_backend, out_path, index_path, corpus_path,
                 web_cache_path):
    """Re-run recorded queries against the other text-search backend."""
    box = _build_sandbox(alt_backend, index_path, corpus_path, web_cache_path, None)
    reports = [
        backend_swap_replay(record, box.text_search)
        for record in read_episodes(episodes_path)
    ]
    payload = {
        "alt_backend": alt_backend,
        "episodes": reports,
        "summary": {
            "episodes": len(reports),
            "text_calls": sum(r["summary"]["text_calls"] for r in reports),
            "changed": sum(r["summary"]["changed"] for r in reports),
            "failures": sum(r["summary"]["failures"] for r in reports),
        },
    }
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    click.echo(json.dumps(payload["summary"], indent=2, sort_keys=True))


@main.command("report")
@click.option("--episodes", "episodes_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
def report_cmd(episodes_path, out_dir):
    """Write report.csv and summary figures for an episode file."""
    from .report import write_report

    records = read_episodes(episodes_path)
    paths = write_report(records, out_dir)
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")


if __name__ == "__main__":
    main(prog_name="searchgym")
