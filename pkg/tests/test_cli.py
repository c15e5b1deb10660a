"""CLI tests: every subcommand drives the real pipeline on tiny fixtures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import FIXTURE_PAGES, make_samples, seeded_image_cache
from searchgym.cli import main
from searchgym.corpus import build_corpus
from searchgym.embeddings import ReferenceEmbedder
from searchgym.flat_index import build_index
from searchgym.metadata import write_dataset

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    build_corpus(FIXTURE_PAGES, corpus_path)
    index_path = tmp_path / "flat.idx"
    build_index(corpus_path, ReferenceEmbedder()).save(index_path)
    image_cache_path = tmp_path / "images.json"
    seeded_image_cache().save(image_cache_path)
    dataset_path = tmp_path / "dataset.jsonl"
    write_dataset(make_samples(), dataset_path)
    return {
        "dir": tmp_path,
        "corpus": corpus_path,
        "index": index_path,
        "images": image_cache_path,
        "dataset": dataset_path,
    }


class TestCorpusCli:
    def test_build_from_dump(self, runner, tmp_path):
        out = tmp_path / "corpus.jsonl"
        result = runner.invoke(
            main,
            ["corpus", "build", "--dump", str(DATA_DIR / "fixture_dump.xml"),
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        stats = json.loads(result.output)
        assert stats["pages_kept"] == 4
        assert out.exists()

    def test_custom_bounds(self, runner, tmp_path):
        out = tmp_path / "corpus.jsonl"
        result = runner.invoke(
            main,
            ["corpus", "build", "--dump", str(DATA_DIR / "fixture_dump.xml"),
             "--out", str(out), "--min-len", "50", "--max-len", "400"],
        )
        assert result.exit_code == 0
        for line in out.read_text().splitlines():
            assert 50 <= len(json.loads(line)["text"]) <= 400


class TestIndexCli:
    def test_build_and_query(self, runner, workspace, tmp_path):
        out = tmp_path / "new.idx"
        built = runner.invoke(
            main, ["index", "build", "--corpus", str(workspace["corpus"]), "--out", str(out)]
        )
        assert built.exit_code == 0, built.output
        assert "indexed 3 chunks" in built.output
        queried = runner.invoke(
            main,
            ["index", "query", "--index", str(out), "--text", "capital of France",
             "--k", "2", "--corpus", str(workspace["corpus"])],
        )
        assert queried.exit_code == 0, queried.output
        assert queried.output.count("chunk ") == 2
        assert "score" in queried.output


class TestPrecomputeImagesCli:
    def test_precompute_writes_cache(self, runner, workspace, tmp_path, monkeypatch):
        import searchgym.webclients as webclients

        class StubImageClient:
            def __init__(self, api_key):
                assert api_key == "test-key"

            def search_by_image(self, image_ref):
                return [(f"{image_ref}#m{i}", f"Page {i}") for i in range(12)]

        monkeypatch.setattr(webclients, "SerperImageClient", StubImageClient)
        out = tmp_path / "fresh_images.json"
        result = runner.invoke(
            main,
            ["sandbox", "precompute-images", "--dataset", str(workspace["dataset"]),
             "--out", str(out), "--serper-key", "test-key"],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["fetched"] == 4
        from searchgym.sandbox import ImageCache

        cache = ImageCache.load(out)
        assert all(len(v) == 10 for v in cache.entries.values())


class TestMetadataCli:
    def test_tag_with_scripted_policy(self, runner, workspace, tmp_path):
        out = tmp_path / "tagged.jsonl"
        result = runner.invoke(
            main,
            ["metadata", "tag", "--dataset", str(workspace["dataset"]),
             "--out", str(out), "--rollouts", "4",
             "--policy", "scripted:always_answer", "--judge", "deterministic"],
        )
        assert result.exit_code == 0, result.output
        tagged = [json.loads(line) for line in out.read_text().splitlines()]
        # gold answers always given, so every sample probes tool_free
        assert all(r["metadata"] == "tool_free" for r in tagged)
        summary = json.loads(result.output)
        assert summary["tool_free_ratio"] == 1.0


class TestRolloutCli:
    def run_rollout(self, runner, workspace, out, run_id="run-0",
                    policy="scripted:oracle_aligned"):
        return runner.invoke(
            main,
            ["rollout", "run", "--dataset", str(workspace["dataset"]),
             "--policy", policy, "--mode", "local",
             "--config", "decomposed", "--out", str(out),
             "--index", str(workspace["index"]), "--corpus", str(workspace["corpus"]),
             "--image-cache", str(workspace["images"]), "--run-id", run_id],
        )

    def test_run_writes_episodes_and_metrics(self, runner, workspace, tmp_path):
        out = tmp_path / "episodes.jsonl"
        result = self.run_rollout(runner, workspace, out)
        assert result.exit_code == 0, result.output
        metrics = json.loads(result.output)
        assert metrics["episodes"] == 4
        assert metrics["accuracy"] == 1.0
        assert metrics["tool_call_ratio"] == 0.75
        assert len(out.read_text().splitlines()) == 4

    def test_two_runs_byte_identical(self, runner, workspace, tmp_path):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        r1 = self.run_rollout(runner, workspace, first)
        r2 = self.run_rollout(runner, workspace, second)
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert first.read_bytes() == second.read_bytes()
        assert json.loads(r1.output) == json.loads(r2.output)

    def test_swap_replay(self, runner, workspace, tmp_path):
        episodes = tmp_path / "episodes.jsonl"
        assert self.run_rollout(runner, workspace, episodes).exit_code == 0
        report_path = tmp_path / "swap.json"
        result = runner.invoke(
            main,
            ["rollout", "swap", "--episodes", str(episodes), "--alt-backend", "web",
             "--out", str(report_path), "--web-cache", str(tmp_path / "web.sqlite")],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["alt_backend"] == "web"
        assert report["summary"]["text_calls"] == 3
        # no web client configured and empty cache: every replay fails, none crash
        assert report["summary"]["failures"] == 3

    def test_limits_file(self, runner, workspace, tmp_path):
        limits_path = tmp_path / "limits.json"
        limits_path.write_text(json.dumps({
            "max_assistant_turns": 2,
            "max_tool_response_chars": 4096,
            "max_prompt_chars": 8192,
            "max_response_chars": 16384,
        }))
        out = tmp_path / "episodes.jsonl"
        result = runner.invoke(
            main,
            ["rollout", "run", "--dataset", str(workspace["dataset"]),
             "--policy", "scripted:always_search", "--mode", "local",
             "--config", "decomposed", "--out", str(out),
             "--index", str(workspace["index"]), "--corpus", str(workspace["corpus"]),
             "--limits-file", str(limits_path)],
        )
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert all(len(r["trace"]["turns"]) == 2 for r in records)


class TestScoreCli:
    def test_score_episode_file(self, runner, workspace, tmp_path):
        episodes = tmp_path / "episodes.jsonl"
        TestRolloutCli().run_rollout(runner, workspace, episodes)
        result = runner.invoke(
            main,
            ["score", "--traces", str(episodes), "--dataset", str(workspace["dataset"]),
             "--config", "conf", "--judge", "deterministic"],
        )
        assert result.exit_code == 0, result.output
        rows = [json.loads(line) for line in result.output.splitlines()
                if line.startswith("{")]
        assert len(rows) == 4
        assert all(r["config_kind"] == "conf" for r in rows)
        tool_users = [r for r in rows if r["tool_used"] == 1]
        assert all(r["composite"] <= 0.91 for r in tool_users)


class TestReportCli:
    def test_report_writes_csv_and_figures(self, runner, workspace, tmp_path):
        episodes = tmp_path / "episodes.jsonl"
        TestRolloutCli().run_rollout(runner, workspace, episodes)
        out_dir = tmp_path / "report"
        result = runner.invoke(
            main, ["report", "--episodes", str(episodes), "--out-dir", str(out_dir)]
        )
        assert result.exit_code == 0, result.output
        with open(out_dir / "report.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 4
        assert {row["sample_id"] for row in rows} == {"s1", "s2", "s3", "s4"}
        assert (out_dir / "reward_components.png").stat().st_size > 0
        assert (out_dir / "composite_hist.png").stat().st_size > 0
