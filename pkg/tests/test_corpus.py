"""Corpus pipeline tests: filtering, cleaning, chunking, dedup, golden build."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchgym.corpus import (
    DISCARD_DISAMBIGUATION,
    DISCARD_NAMESPACE,
    DISCARD_REDIRECT,
    RawPage,
    build_corpus,
    chunk_text,
    clean_markup,
    dedup,
    filter_page,
    inject_context,
    norm_hash,
    parse_dump,
    read_corpus,
    split_sections,
)

DATA_DIR = Path(__file__).parent / "data"


def page(ns=0, redirect=False, disambig=False, pid=1, title="T", sections=None):
    return RawPage(pid, title, ns, redirect, disambig, sections or [("", "body")])


class TestFilterPage:
    def test_main_namespace_content_page_kept(self):
        assert filter_page(page()) == (True, None)

    def test_category_page_discarded_by_namespace(self):
        assert filter_page(page(ns=14)) == (False, DISCARD_NAMESPACE)

    def test_redirect_discarded(self):
        assert filter_page(page(redirect=True)) == (False, DISCARD_REDIRECT)

    def test_disambiguation_discarded(self):
        assert filter_page(page(disambig=True)) == (False, DISCARD_DISAMBIGUATION)

    def test_decision_depends_only_on_flags(self):
        for ns in (0, 1, 14):
            for redirect in (False, True):
                for disambig in (False, True):
                    a = filter_page(page(ns=ns, redirect=redirect, disambig=disambig,
                                         pid=1, title="A"))
                    b = filter_page(page(ns=ns, redirect=redirect, disambig=disambig,
                                         pid=99, title="B", sections=[("S", "other")]))
                    assert a == b


class TestCleanMarkup:
    def test_piped_link_keeps_display_text(self):
        assert clean_markup("see [[Paris|the city]]") == "see the city"

    def test_plain_link_keeps_target(self):
        assert clean_markup("in [[France]] today") == "in France today"

    def test_template_removed(self):
        assert clean_markup("{{Infobox city|name=Paris}}Paris is large.") == "Paris is large."

    def test_identity_on_plain_text(self):
        assert clean_markup("plain sentence.") == "plain sentence."

    def test_nested_templates_removed(self):
        assert clean_markup("a{{x|{{y|{{z}}}}}}b") == "ab"

    def test_ref_tags_removed_with_content(self):
        assert clean_markup("a<ref name=x>cite</ref>b") == "ab"
        assert clean_markup("a<ref name=x />b") == "ab"

    def test_html_tags_stripped_inner_text_kept(self):
        assert clean_markup("<b>bold</b> text") == "bold text"

    def test_comments_removed(self):
        assert clean_markup("a<!-- hidden -->b") == "ab"

    def test_tags_starting_with_ref_are_not_refs(self):
        assert clean_markup("<reference>kept</reference>") == "kept"

    def test_no_markup_tokens_survive(self):
        nasty = "x{{a{{b{{c{{d}}}}}}}}y [[u [[v]] w <ref oops"
        cleaned = clean_markup(nasty)
        for token in ("[[", "{{", "<ref"):
            assert token not in cleaned

    @given(st.text(alphabet="ab []{}<>|refthink/=.\n ", max_size=200))
    @settings(max_examples=200)
    def test_idempotent(self, text):
        once = clean_markup(text)
        assert clean_markup(once) == once


class TestInjectContext:
    def test_title_and_section_header(self):
        result = inject_context("Paris", "History", "Paris was founded...")
        assert result == "Paris — History\nParis was founded..."

    def test_empty_section_omits_separator(self):
        assert inject_context("Paris", "", "body") == "Paris\nbody"

    def test_cleaning_applied_to_whole_text(self):
        assert inject_context("A", "B", "[[X|Y]]") == "A — B\nY"

    def test_empty_title_rejected(self):
        with pytest.raises(ValueError):
            inject_context("", "S", "body")


def sentence_of(n: int, char: str = "x") -> str:
    return char * (n - 1) + "."


class TestChunkText:
    def test_greedy_accumulation_of_three_sentences(self):
        s = sentence_of(300)
        text = " ".join([s, s, s])
        chunks = chunk_text(text)
        assert len(chunks) == 2
        assert chunks[0] == s + " " + s
        assert chunks[1] == s
        assert len(chunks[0]) == 601

    def test_short_text_dropped(self):
        assert chunk_text("y" * 100) == []

    def test_empty_text(self):
        assert chunk_text("") == []

    def test_oversized_sentence_hard_wrapped(self):
        chunks = chunk_text(sentence_of(1501))
        assert [len(c) for c in chunks] == [700, 700]

    def test_oversized_tail_above_min_kept(self):
        chunks = chunk_text(sentence_of(1000))
        assert [len(c) for c in chunks] == [700, 300]

    def test_undersized_accumulation_before_big_sentence_dropped(self):
        text = sentence_of(100) + " " + sentence_of(650, "y")
        chunks = chunk_text(text)
        assert chunks == [sentence_of(650, "y")]

    def test_delimiter_stays_with_sentence(self):
        s1 = sentence_of(250, "a")
        s2 = "b" * 249 + "?"
        chunks = chunk_text(s1 + " " + s2)
        assert chunks == [s1 + " " + s2]

    def test_no_split_mid_number(self):
        text = ("pi is 3.14159 roughly " * 15).rstrip() + "."
        chunks = chunk_text(text)
        assert chunks and all("3." in c for c in chunks)

    @given(st.text(max_size=3000))
    @settings(max_examples=300)
    def test_bounds_property(self, text):
        for chunk in chunk_text(text):
            assert 220 <= len(chunk) <= 700

    @given(st.lists(st.integers(min_value=5, max_value=900), min_size=1, max_size=20))
    @settings(max_examples=100)
    def test_sentence_order_preserved(self, lengths):
        sentences = [chr(ord("a") + i % 26) * (n - 1) + "." for i, n in enumerate(lengths)]
        text = " ".join(sentences)
        # each chunk is a contiguous substring; later chunks start strictly later
        pos = 0
        for chunk in chunk_text(text):
            found = text.find(chunk, pos)
            assert found >= pos
            pos = found + 1


class TestDedup:
    def test_case_and_whitespace_insensitive(self):
        assert dedup(["The  Cat.", "the cat."]) == ["The  Cat."]

    def test_distinct_kept(self):
        assert dedup(["a", "b"]) == ["a", "b"]

    @given(st.lists(st.text(max_size=30), max_size=50))
    @settings(max_examples=200)
    def test_idempotent(self, texts):
        once = dedup(texts)
        assert dedup(once) == once

    def test_hash_is_md5_of_normalized_text(self):
        import hashlib

        assert norm_hash("The  Cat.") == hashlib.md5(b"the cat.").hexdigest()


class TestBuildCorpus:
    def make_section(self, topic):
        sentence = (f"The {topic} appears in many records and has been described at "
                    "length by several independent writers over the years of study.")
        return " ".join([sentence] * 3)

    def test_stats_count_discards(self, tmp_path):
        pages = [
            RawPage(1, "A", 0, False, False, [("", self.make_section("first topic"))]),
            RawPage(2, "B", 0, True, False, [("", "#redirect")]),
            RawPage(3, "C", 0, False, False, [("", self.make_section("second topic"))]),
        ]
        stats = build_corpus(pages, tmp_path / "c.jsonl")
        assert stats.pages_kept == 2
        assert stats.pages_discarded[DISCARD_REDIRECT] == 1
        assert stats.chunks == 2

    def test_empty_dump(self, tmp_path):
        out = tmp_path / "c.jsonl"
        stats = build_corpus([], out)
        assert stats.to_json() == {
            "pages_kept": 0,
            "pages_discarded": {"namespace": 0, "redirect": 0, "disambiguation": 0},
            "chunks": 0,
            "duplicates_dropped": 0,
        }
        assert out.read_bytes() == b""

    def test_identical_sections_deduped_across_pages(self, tmp_path):
        section = self.make_section("shared topic")
        pages = [
            RawPage(1, "Same", 0, False, False, [("S", section)]),
            RawPage(2, "Same", 0, False, False, [("S", section)]),
        ]
        stats = build_corpus(pages, tmp_path / "c.jsonl")
        assert stats.duplicates_dropped == 1
        assert stats.chunks == 1

    def test_chunk_ids_dense_and_ordered_by_page_id(self, tmp_path):
        pages = [
            RawPage(7, "B", 0, False, False, [("", self.make_section("later page"))]),
            RawPage(2, "A", 0, False, False, [("", self.make_section("earlier page"))]),
        ]
        out = tmp_path / "c.jsonl"
        build_corpus(pages, out)
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["chunk_id"] for r in records] == [0, 1]
        assert [r["source_page_id"] for r in records] == [2, 7]

    def test_io_failure_leaves_no_partial_file(self, tmp_path):
        missing_dir = tmp_path / "nope" / "c.jsonl"
        with pytest.raises(OSError):
            build_corpus([], missing_dir)
        assert not missing_dir.exists()
        assert not list(tmp_path.glob("**/*.tmp"))


class TestGoldenCorpus:
    def test_fixture_dump_builds_byte_identical_corpus(self, tmp_path):
        golden = (DATA_DIR / "golden_corpus.jsonl").read_bytes()
        first = tmp_path / "one.jsonl"
        second = tmp_path / "two.jsonl"
        build_corpus(parse_dump(DATA_DIR / "fixture_dump.xml"), first)
        build_corpus(parse_dump(DATA_DIR / "fixture_dump.xml"), second)
        assert first.read_bytes() == golden
        assert second.read_bytes() == golden

    def test_fixture_covers_every_branch(self, tmp_path):
        stats = build_corpus(parse_dump(DATA_DIR / "fixture_dump.xml"), tmp_path / "c.jsonl")
        assert stats.pages_discarded == {"namespace": 1, "redirect": 1, "disambiguation": 1}
        assert stats.duplicates_dropped == 1
        chunks = read_corpus(tmp_path / "c.jsonl")
        assert all(220 <= len(c.text) <= 700 for c in chunks)
        assert any(len(c.text) == 700 for c in chunks)  # hard-wrapped sentence


class TestDumpParsing:
    def test_split_sections_keeps_lead_as_untitled(self):
        sections = split_sections("lead text\n== One ==\nbody one\n== Two ==\nbody two\n")
        assert [t for t, _ in sections] == ["", "One", "Two"]
        assert "lead text" in sections[0][1]

    def test_jsonl_dump_roundtrip(self, tmp_path):
        dump = tmp_path / "d.jsonl"
        dump.write_text(
            json.dumps({"page_id": 5, "title": "X", "namespace": 0,
                        "sections": [["", "hello world"]]}) + "\n"
        )
        pages = list(parse_dump(dump))
        assert pages[0].page_id == 5
        assert pages[0].sections == [("", "hello world")]

    def test_unknown_extension_rejected(self, tmp_path):
        bad = tmp_path / "d.csv"
        bad.write_text("x")
        with pytest.raises(Exception):
            list(parse_dump(bad))

    def test_random_corpus_reads_back(self, tmp_path):
        rng = random.Random(7)
        sentence = "A steady sentence used to fill out the corpus body for testing. "
        pages = [
            RawPage(i, f"Page {i}", 0, False, False,
                    [("", sentence * rng.randint(4, 9))])
            for i in range(1, 6)
        ]
        out = tmp_path / "c.jsonl"
        stats = build_corpus(pages, out)
        chunks = read_corpus(out)
        assert len(chunks) == stats.chunks
        assert [c.chunk_id for c in chunks] == list(range(len(chunks)))
