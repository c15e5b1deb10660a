"""Shared fixtures: a tiny corpus, its index, and a seeded local sandbox."""

from __future__ import annotations

import pytest

from searchgym.corpus import RawPage, build_corpus, read_corpus
from searchgym.embeddings import ReferenceEmbedder
from searchgym.flat_index import build_index
from searchgym.metadata import VQASample
from searchgym.sandbox import ImageCache, LocalTextSearch, ToolSandbox
from searchgym.webclients import WebResult, WebSearchError


def filler_section(topic: str, sentences: int = 3) -> str:
    base = (
        f"The {topic} is a subject with many documented properties and a long "
        "history of careful study by specialists in the field. "
    )
    sentence = (base * 3)[:250].rstrip().rstrip(".,") + "."
    return " ".join([sentence] * sentences)


FIXTURE_PAGES = [
    RawPage(1, "Paris", 0, False, False, [("", filler_section("capital of France called Paris"))]),
    RawPage(2, "Eiffel Tower", 0, False, False, [("", filler_section("Eiffel Tower landmark of Paris"))]),
    RawPage(3, "Cat", 0, False, False, [("", filler_section("domestic cat, a small feline"))]),
]


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    build_corpus(FIXTURE_PAGES, path)
    return path


@pytest.fixture(scope="session")
def embedder():
    return ReferenceEmbedder()


@pytest.fixture(scope="session")
def chunks(corpus_path):
    return read_corpus(corpus_path)


@pytest.fixture(scope="session")
def flat_index(corpus_path, embedder):
    return build_index(corpus_path, embedder)


@pytest.fixture
def local_search(embedder, flat_index, chunks):
    return LocalTextSearch(embedder, flat_index, chunks)


def seeded_image_cache() -> ImageCache:
    return ImageCache(
        {
            "s1": [(f"https://img.example/{i}.jpg", f"Result {i}") for i in range(10)],
            "s2": [("https://img.example/a.jpg", "Only result")],
            "s-empty": [],
        }
    )


@pytest.fixture
def local_sandbox(local_search):
    return ToolSandbox(mode="local", text_search=local_search, image_cache=seeded_image_cache())


def make_samples() -> list[VQASample]:
    return [
        VQASample("s1", "What is the capital of France?", "https://img.example/q1.jpg",
                  "Paris", metadata="tool_required"),
        VQASample("s2", "Which landmark towers over Paris?", "https://img.example/q2.jpg",
                  "Eiffel Tower", metadata="tool_required"),
        VQASample("s3", "What animal purrs?", "https://img.example/q3.jpg",
                  "Cat", metadata="tool_required"),
        VQASample("s4", "What is two plus two?", "https://img.example/q4.jpg",
                  "Four", metadata="tool_free"),
    ]


@pytest.fixture
def samples():
    return make_samples()


class CountingWebClient:
    """Deterministic web-search stand-in that counts upstream calls."""

    def __init__(self, results_per_query: int = 7, failing: bool = False):
        self.calls = 0
        self.results_per_query = results_per_query
        self.failing = failing

    def search(self, query: str) -> list[WebResult]:
        self.calls += 1
        if self.failing:
            raise WebSearchError("upstream down")
        return [
            WebResult(
                title=f"{query} result {i}",
                link=f"https://web.example/{query.replace(' ', '-')}/{i}",
                snippet=f"Snippet {i} about {query}.",
            )
            for i in range(self.results_per_query)
        ]


class CountingImageClient:
    """Image-search stand-in; optionally fails for specific image refs."""

    def __init__(self, results: int = 12, fail_refs: set[str] | None = None):
        self.calls = 0
        self.results = results
        self.fail_refs = fail_refs or set()

    def search_by_image(self, image_ref: str) -> list[tuple[str, str]]:
        self.calls += 1
        if image_ref in self.fail_refs:
            raise WebSearchError("lens failure")
        return [(f"{image_ref}#match{i}", f"Page {i}") for i in range(self.results)]
